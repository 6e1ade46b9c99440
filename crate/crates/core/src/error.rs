use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the identification pipeline and its building blocks.
#[derive(Debug, Error)]
pub enum SysIdError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("model is not Schur stable (spectral radius {0:.6})")]
    Unstable(f64),

    #[error("z = {0} is a pole of the transfer function")]
    Pole(Complex64),

    #[error("model is not minimal: numerical rank {rank} < state dimension {order}")]
    NonMinimal { rank: usize, order: usize },

    #[error("trajectory of length {len} is too short for window d = {d} (need at least {need})")]
    TrajectoryTooShort { len: usize, d: usize, need: usize },

    #[error("candidate window set is empty for T = {0}; more data is required")]
    EmptyCandidateSet(usize),

    #[error("order k = {k} exceeds the rank budget {budget} of the Hankel estimate")]
    RankBudget { k: usize, budget: usize },

    #[error("singular value sigma_{k} = {value:e} is numerically zero")]
    VanishingSingularValue { k: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, SysIdError>;
