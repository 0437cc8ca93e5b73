use thiserror::Error;

use crate::solver::TrajectoryRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("no sign change for boundary compatibility at phi = {phi}")]
    NoBracket { phi: f64 },

    #[error("diverged at step {step} (t = {t})")]
    Diverged {
        step: usize,
        t: f64,
        partial: Box<TrajectoryRecord>,
    },

    #[error("self-consistent stress iteration did not converge on [{t0}, {t1}]")]
    NoConvergence { t0: f64, t1: f64 },

    #[error("shift {0} is not aligned with the trajectory sampling or exceeds its span")]
    Shift(f64),

    #[error("trajectory records are incompatible: {0}")]
    Trajectory(String),

    #[error("grid has {nodes} nodes; dense reference is limited to {limit}")]
    TooLarge { nodes: usize, limit: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
