//! Error types shared across the crate.

use thiserror::Error;

/// Errors that can occur while estimating or benchmarking.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An iterative numerical routine failed to converge or produced an
    /// unusable result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A configuration file could not be parsed or failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// A data file is malformed; `line` is 1-based.
    #[error("data format error at line {line}: {message}")]
    DataFormat { line: u64, message: String },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }

    pub(crate) fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
