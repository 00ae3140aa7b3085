use thiserror::Error;

use crate::solver::SolveStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("malformed program: {0}")]
    MalformedProgram(String),
    #[error("solver stopped with status {status:?} (gap {gap:.3e}, violation {max_violation:.3e})")]
    Solver {
        status: SolveStatus,
        gap: f64,
        max_violation: f64,
    },
    #[error("pattern constraints violated by {0:.3e}, cost equality does not apply")]
    ConstraintViolation(f64),
    #[error("training diverged at epoch {0}")]
    Divergence(usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
