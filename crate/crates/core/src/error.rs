use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImopError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid parameter vector: {0}")]
    InvalidParams(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("estimator diverged: {0}")]
    Diverged(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, ImopError>;
