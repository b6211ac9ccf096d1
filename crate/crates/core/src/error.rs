use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrogError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular parameters: {0}")]
    Singularity(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("precision exhausted: {0}")]
    Precision(String),
    #[error("outside the valid regime: {0}")]
    Regime(String),
    #[error("bracket error: {0}")]
    Bracket(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FrogError>;
