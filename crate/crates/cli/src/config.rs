//! Experiment configuration: one TOML file with a section per module.

use std::f64::consts::FRAC_PI_4;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use wvsim_core::evolution::PropagatorConfig;
use wvsim_core::spin::InterferometerConfig;
use wvsim_core::state::{CoherentStateSpec, Grid1D, PhysicalParams, Potential, PotentialKind};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    FiniteDim,
    Tof,
    Bohmian,
    Spin,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::FiniteDim => "finite_dim",
            Scenario::Tof => "tof",
            Scenario::Bohmian => "bohmian",
            Scenario::Spin => "spin",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Required whenever the scenario draws random numbers.
    pub seed: Option<u64>,
    /// Relative paths resolve against the output root.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub physics: PhysicalParams,
    pub grid: Option<GridSpec>,
    pub potential: Option<PotentialKind>,
    pub state: Option<CoherentStateSpec>,
    pub propagation: Option<PropagatorConfig>,
    pub finite_dim: Option<FiniteDimSpec>,
    pub tof: Option<TofSpec>,
    pub bohmian: Option<BohmianSpec>,
    pub spin: Option<SpinSpec>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("wvsim-out")
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

/// An explicit operator with pre- and post-selected vectors, and the number
/// of random draws for the triple-identity checks. Complex entries are
/// written `[re, im]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteDimSpec {
    pub operator: Option<Vec<Vec<[f64; 2]>>>,
    pub pre_state: Option<Vec<[f64; 2]>>,
    pub post_state: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_draws")]
    pub random_draws: usize,
    #[serde(default = "default_min_dim")]
    pub min_dim: usize,
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
}

fn default_draws() -> usize {
    1000
}

fn default_min_dim() -> usize {
    2
}

fn default_max_dim() -> usize {
    8
}

impl Default for FiniteDimSpec {
    fn default() -> Self {
        Self {
            operator: None,
            pre_state: None,
            post_state: None,
            random_draws: default_draws(),
            min_dim: default_min_dim(),
            max_dim: default_max_dim(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TofSpec {
    pub detectors: Vec<f64>,
    /// Stencil of the exact-field finite difference.
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    /// Clicks per detector side; zero skips the sampled estimate.
    #[serde(default)]
    pub clicks: usize,
    /// Stencil of the click-histogram estimate, wide enough for the
    /// log-ratio to rise above counting noise.
    #[serde(default = "default_click_fd_step")]
    pub click_fd_step: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    pub transmission: Option<TransmissionSpec>,
}

fn default_fd_step() -> f64 {
    1e-3
}

fn default_click_fd_step() -> f64 {
    0.4
}

fn default_bins() -> usize {
    100
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionSpec {
    pub source_x: f64,
    pub shutter_time: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BohmianSpec {
    /// Ensemble size for the equivariance check.
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    /// How many ensemble members get a CSV dump.
    #[serde(default = "default_dump")]
    pub dump: usize,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

fn default_trajectories() -> usize {
    1000
}

fn default_dump() -> usize {
    10
}

/// Sweep over coupling angle and post-selected path angle; path states are
/// `(cos theta, sin theta)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSpec {
    pub alpha: Vec<f64>,
    pub post_angle: Vec<f64>,
    #[serde(default = "default_pre_angle")]
    pub pre_angle: f64,
    /// Incident particles per analyzer axis; zero skips the shot-noise columns.
    #[serde(default)]
    pub shots_per_axis: u64,
}

fn default_pre_angle() -> f64 {
    FRAC_PI_4
}

/// Validated pieces of a wavepacket scenario.
#[derive(Debug, Clone)]
pub struct WavepacketSetup {
    pub params: PhysicalParams,
    pub grid: Grid1D,
    pub potential: Potential,
    pub state: CoherentStateSpec,
    pub propagation: PropagatorConfig,
}

fn invalid(location: &str, err: impl ToString) -> ConfigError {
    ConfigError::Invalid { location: location.into(), message: err.to_string() }
}

fn required<'a, T>(section: &'a Option<T>, name: &str, scenario: Scenario) -> Result<&'a T, ConfigError> {
    section.as_ref().ok_or_else(|| ConfigError::MissingSection { section: name.into(), scenario: scenario.name().into() })
}

fn one_line(err: &toml::de::Error) -> String {
    err.to_string().split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn to_complex(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|&[re, im]| Complex64::new(re, im)).collect()
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<toml::Value, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse(one_line(&e)))
    }

    pub fn from_value(value: toml::Value) -> Result<Self, ConfigError> {
        let cfg: Self = value.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(one_line(&e)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or_else(|| ConfigError::MissingSeed { scenario: self.scenario.name().into() })
    }

    /// Checks every section the scenario reads, naming the first offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.physics.validate().map_err(|e| invalid("physics", e))?;
        match self.scenario {
            Scenario::FiniteDim => self.validate_finite_dim(),
            Scenario::Tof => {
                let setup = self.wavepacket()?;
                let tof = required(&self.tof, "tof", self.scenario)?;
                if tof.detectors.is_empty() {
                    return Err(invalid("tof.detectors", "at least one detector is required"));
                }
                for (k, &x) in tof.detectors.iter().enumerate() {
                    if !setup.grid.contains(x) {
                        return Err(invalid(&format!("tof.detectors[{k}]"), format!("detector {x} lies outside the grid")));
                    }
                }
                for (name, v) in [("tof.fd_step", tof.fd_step), ("tof.click_fd_step", tof.click_fd_step)] {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(invalid(name, format!("step must be positive, got {v}")));
                    }
                }
                if tof.bins == 0 {
                    return Err(invalid("tof.bins", "need at least one bin"));
                }
                if tof.clicks > 0 {
                    self.seed()?;
                }
                Ok(())
            }
            Scenario::Bohmian => {
                self.wavepacket()?;
                let b = required(&self.bohmian, "bohmian", self.scenario)?;
                if b.trajectories == 0 || b.histogram_bins == 0 {
                    return Err(invalid("bohmian", "trajectories and histogram_bins must be positive"));
                }
                self.seed()?;
                Ok(())
            }
            Scenario::Spin => {
                let s = required(&self.spin, "spin", self.scenario)?;
                if s.alpha.is_empty() || s.post_angle.is_empty() {
                    return Err(invalid("spin", "alpha and post_angle need at least one value each"));
                }
                for (k, &alpha) in s.alpha.iter().enumerate() {
                    InterferometerConfig::from_angles(alpha, s.pre_angle, 0.0)
                        .validate()
                        .map_err(|e| invalid(&format!("spin.alpha[{k}]"), e))?;
                }
                if s.shots_per_axis > 0 {
                    self.seed()?;
                }
                Ok(())
            }
        }
    }

    fn validate_finite_dim(&self) -> Result<(), ConfigError> {
        let spec = self.finite_dim.clone().unwrap_or_default();
        if spec.min_dim < 2 || spec.max_dim < spec.min_dim {
            return Err(invalid("finite_dim.min_dim", "need 2 <= min_dim <= max_dim"));
        }
        if spec.random_draws > 0 {
            self.seed()?;
        }
        match (&spec.operator, &spec.pre_state, &spec.post_state) {
            (None, None, None) => Ok(()),
            (Some(op), Some(pre), Some(post)) => {
                let n = op.len();
                if n == 0 || op.iter().any(|row| row.len() != n) {
                    return Err(invalid("finite_dim.operator", "operator must be a non-empty square matrix"));
                }
                for (name, v) in [("finite_dim.pre_state", pre), ("finite_dim.post_state", post)] {
                    if v.len() != n {
                        return Err(invalid(name, format!("expected {n} entries, got {}", v.len())));
                    }
                    if to_complex(v).iter().all(|z| z.norm() == 0.0) {
                        return Err(invalid(name, "vector is zero"));
                    }
                }
                Ok(())
            }
            _ => Err(invalid("finite_dim", "operator, pre_state and post_state go together")),
        }
    }

    /// Grid, potential, packet and propagator, each validated by its module.
    pub fn wavepacket(&self) -> Result<WavepacketSetup, ConfigError> {
        let g = required(&self.grid, "grid", self.scenario)?;
        let grid = Grid1D::new(g.x_min, g.x_max, g.n_points).map_err(|e| invalid("grid", e))?;
        let kind = required(&self.potential, "potential", self.scenario)?;
        let potential = Potential::new(kind.clone(), &grid, &self.physics).map_err(|e| invalid("potential", e))?;
        let state = *required(&self.state, "state", self.scenario)?;
        wvsim_core::state::prepare_coherent_state(&state, &grid, &self.physics).map_err(|e| invalid("state", e))?;
        let propagation = *required(&self.propagation, "propagation", self.scenario)?;
        propagation.validate().map_err(|e| invalid("propagation", e))?;
        Ok(WavepacketSetup { params: self.physics, grid, potential, state, propagation })
    }
}
