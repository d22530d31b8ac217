//! CSV tables, JSON envelopes, invariant checks and the run manifest.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Scenario;
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Shortest round-trip text of a float, in scientific notation outside
/// `[1e-4, 1e6)`.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == 0.0 || (1e-4..1e6).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// One invariant check: passes when `value <= tolerance`.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance }
    }
}

#[derive(Debug, Clone)]
pub struct Csv {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|&v| num(v)).collect());
    }

    /// `(t, value, stderr)` rows; `None` values become `nan`.
    pub fn series(name: impl Into<String>, times: &[f64], values: &[Option<f64>], stderr: Option<&[f64]>) -> Self {
        let mut csv = Self::new(name, &["t", "value", "stderr"]);
        for (k, (&t, v)) in times.iter().zip(values).enumerate() {
            csv.push(&[t, v.unwrap_or(f64::NAN), stderr.map_or(0.0, |s| s[k])]);
        }
        csv
    }

    pub fn render(&self, config_hash: &str) -> String {
        let mut out = format!("# config_hash={config_hash}\n{}\n", self.columns.join(","));
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub enum Artifact {
    Csv(Csv),
    Json { name: String, data: serde_json::Value },
}

impl Artifact {
    pub fn json(name: impl Into<String>, data: impl Serialize) -> Self {
        Artifact::Json { name: name.into(), data: serde_json::to_value(data).expect("plain data serializes") }
    }

    pub fn name(&self) -> &str {
        match self {
            Artifact::Csv(c) => &c.name,
            Artifact::Json { name, .. } => name,
        }
    }

    pub fn render(&self, scenario: Scenario, config_hash: &str) -> String {
        match self {
            Artifact::Csv(c) => c.render(config_hash),
            Artifact::Json { data, .. } => {
                let envelope = serde_json::json!({
                    "config_hash": config_hash,
                    "version": VERSION,
                    "scenario": scenario,
                    "data": data,
                });
                serde_json::to_string_pretty(&envelope).expect("json values serialize") + "\n"
            }
        }
    }
}

/// What a scenario produced: data files and invariant checks.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        self.checks.push(Check::below(name, value, tolerance));
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub scenario: Scenario,
    pub seed: Option<u64>,
    pub wall_time_s: f64,
    pub files: Vec<FileEntry>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Output { path: path.display().to_string(), message: e.to_string() })
}

/// Writes every artifact into `dir` and returns the file list.
pub fn write_artifacts(dir: &Path, outcome: &Outcome, scenario: Scenario, config_hash: &str) -> Result<Vec<FileEntry>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Output { path: dir.display().to_string(), message: e.to_string() })?;
    outcome
        .artifacts
        .iter()
        .map(|a| {
            let text = a.render(scenario, config_hash);
            write_file(&dir.join(a.name()), &text)?;
            Ok(FileEntry { path: a.name().to_string(), sha256: sha256_hex(text.as_bytes()) })
        })
        .collect()
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("manifest serializes") + "\n";
    write_file(path, &text)
}
