use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid setup: {0}")]
    InvalidSetup(String),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("inadmissible choice {0}")]
    Inadmissible(String),
    #[error("malformed trace: {0}")]
    Trace(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
