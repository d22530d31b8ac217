//! Scenario drivers. Each one returns its data files and invariant checks
//! without touching the filesystem.

mod bohmian;
mod finite_dim;
mod spin;
mod tof;

use crate::config::{ExperimentConfig, Scenario};
use crate::error::CliError;
use crate::output::Outcome;

/// `Run` produces the full data set; `Verify` only needs the checks and
/// shrinks sample sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Verify,
}

pub fn execute(cfg: &ExperimentConfig, mode: Mode) -> Result<Outcome, CliError> {
    match cfg.scenario {
        Scenario::FiniteDim => finite_dim::execute(cfg),
        Scenario::Tof => tof::execute(cfg, mode),
        Scenario::Bohmian => bohmian::execute(cfg, mode),
        Scenario::Spin => spin::execute(cfg),
    }
}
