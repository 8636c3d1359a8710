use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration supplied by the caller.
    #[error("config error: {0}")]
    Config(String),
    /// A runtime contract between modules was violated (estimator/ledger
    /// corruption, action outside the presented set, decreasing importance
    /// weights, ...).
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
