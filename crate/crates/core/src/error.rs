use thiserror::Error;

/// Errors raised by the solver and the estimate harness.
#[derive(Debug, Error)]
pub enum KineticError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("weight outside the admissible region: {0}")]
    Hypothesis(String),
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, KineticError>;
