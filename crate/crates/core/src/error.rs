//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed binary payload (truncated cf32 file, odd byte count, ...).
    #[error("format error: {0}")]
    Format(String),

    /// Missing or invalid sidecar metadata.
    #[error("metadata error: {0}")]
    Metadata(String),

    /// Input data violates an invariant (NaN samples, zero-power frame, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A precondition or configuration constraint was violated.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A requested size exceeds what the generator can satisfy.
    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
    pub fn metadata(msg: impl Into<String>) -> Self {
        Error::Metadata(msg.into())
    }
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
    pub fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }

    /// Process exit code convention: 1 for validation problems, 2 for
    /// runtime/data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Capacity(_) | Error::Json(_) => 1,
            Error::Format(_) | Error::Metadata(_) | Error::Data(_) | Error::Io(_) => 2,
        }
    }
}
