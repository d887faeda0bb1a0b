use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs outside the domain of an operation (unstable load, bad probability, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The synchronizer saw an arrival it can never legitimately see.
    #[error("synchronizer protocol violation: {0}")]
    Protocol(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
