//! `--param path=range` parsing and Cartesian expansion over config values.

use crate::error::ConfigError;

/// One swept config entry, e.g. `potential.height=1:4:4`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSweep {
    pub path: String,
    pub values: Vec<f64>,
}

fn param_error(spec: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Param { spec: spec.into(), message: message.into() }
}

/// `path=start:stop:count` (inclusive, evenly spaced) or `path=v1,v2,...`.
pub fn parse_param(spec: &str) -> Result<ParamSweep, ConfigError> {
    let (path, range) = spec.split_once('=').ok_or_else(|| param_error(spec, "expected path=range"))?;
    if path.is_empty() {
        return Err(param_error(spec, "empty path"));
    }
    let number = |s: &str| s.trim().parse::<f64>().map_err(|_| param_error(spec, format!("`{s}` is not a number")));
    let values = if range.contains(':') {
        let parts: Vec<&str> = range.split(':').collect();
        let [start, stop, count] = parts[..] else {
            return Err(param_error(spec, "range form is start:stop:count"));
        };
        let (start, stop) = (number(start)?, number(stop)?);
        let count: usize = count.trim().parse().map_err(|_| param_error(spec, "count must be a positive integer"))?;
        match count {
            0 => return Err(param_error(spec, "count must be a positive integer")),
            1 => vec![start],
            _ => (0..count).map(|k| start + (stop - start) * k as f64 / (count - 1) as f64).collect(),
        }
    } else {
        range.split(',').map(number).collect::<Result<Vec<_>, _>>()?
    };
    Ok(ParamSweep { path: path.to_string(), values })
}

/// Every combination of the sweep values, first parameter slowest.
pub fn cartesian(sweeps: &[ParamSweep]) -> Vec<Vec<f64>> {
    sweeps.iter().fold(vec![Vec::new()], |acc, s| {
        acc.iter()
            .flat_map(|prefix| {
                s.values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

/// Sets the entry at a dotted path, creating missing tables. Numeric
/// segments index arrays. An existing integer entry stays an integer.
pub fn set_path(root: &mut toml::Value, path: &str, value: f64) -> Result<(), ConfigError> {
    let segments: Vec<&str> = path.split('.').collect();
    let (last, parents) = segments.split_last().expect("split yields at least one segment");
    let mut node = root;
    for seg in parents {
        node = match node {
            toml::Value::Table(t) => t.entry(seg.to_string()).or_insert_with(|| toml::Value::Table(Default::default())),
            toml::Value::Array(a) => {
                let i: usize = seg.parse().map_err(|_| param_error(path, format!("`{seg}` does not index an array")))?;
                a.get_mut(i).ok_or_else(|| param_error(path, format!("index {i} out of range")))?
            }
            _ => return Err(param_error(path, format!("`{seg}` is not a table"))),
        };
    }
    let slot = match node {
        toml::Value::Table(t) => t.entry(last.to_string()).or_insert(toml::Value::Float(value)),
        toml::Value::Array(a) => {
            let i: usize = last.parse().map_err(|_| param_error(path, format!("`{last}` does not index an array")))?;
            a.get_mut(i).ok_or_else(|| param_error(path, format!("index {i} out of range")))?
        }
        _ => return Err(param_error(path, "parent is not a table")),
    };
    *slot = match slot {
        toml::Value::Integer(_) => {
            if value.fract() != 0.0 {
                return Err(param_error(path, format!("integer entry cannot take {value}")));
            }
            toml::Value::Integer(value as i64)
        }
        _ => toml::Value::Float(value),
    };
    Ok(())
}
