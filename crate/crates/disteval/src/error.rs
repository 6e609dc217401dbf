//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by parsing, validation, and analysis operations.
#[derive(Error, Debug)]
pub enum Error {
    /// A line of an input file could not be parsed or violated an invariant.
    #[error("parse error at line {line}: {message}")]
    Parse {
        /// 1-based line number within the input stream.
        line: usize,
        /// Description of what went wrong.
        message: String,
    },

    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Referenced data (system, request, attribute, ...) is absent.
    #[error("missing data: {0}")]
    MissingData(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// CSV-level failure while reading an attribute table.
    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// JSON (de)serialization failure while handling reports.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    pub(crate) fn missing(message: impl Into<String>) -> Self {
        Error::MissingData(message.into())
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
