use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] ssp_core::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("runs disagree on the episode count: {0} vs {1}")]
    MismatchedLength(usize, usize),
    #[error("nothing to aggregate: {0}")]
    Empty(String),
    #[error("window fraction must lie in (0, 0.5], got {0}")]
    Fraction(f64),
    #[error("malformed run directory {path}: {reason}")]
    Layout { path: String, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;
