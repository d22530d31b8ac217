use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("states live on different grids")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("wavepacket not contained in grid: {0}")]
    Containment(String),

    #[error("post-selection is orthogonal to the pre-selected state (|<phi|psi>| = {overlap:e})")]
    OrthogonalSelection { overlap: f64 },

    #[error("wavefunction node at x = {x}: relative density {relative_density:e} below threshold")]
    Node { x: f64, relative_density: f64 },

    #[error("node inside reconstruction interval at grid index {index}")]
    NodeInInterval { index: usize },

    #[error("probability {probability:e} leaked to the grid edge at t = {time}")]
    BoundaryLeak { time: f64, probability: f64 },

    #[error("time distribution at x = {x} has an open tail: final/peak = {ratio:e}")]
    OpenTail { x: f64, ratio: f64 },

    #[error("Bohmian trajectory approached a node at t = {time}, x = {x}")]
    NodeApproach { time: f64, x: f64 },

    #[error("degenerate interferometer angle alpha = {alpha}: must lie strictly inside (0, pi)")]
    DegenerateAngle { alpha: f64 },

    #[error("snapshot spacing {spacing} exceeds {limit} (a tenth of the fastest phase period)")]
    CoarseSnapshots { spacing: f64, limit: f64 },

    #[error("invalid protocol configuration: {0}")]
    InvalidProtocol(String),

    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
