use std::io;

use thiserror::Error;

/// Errors raised across the surprise pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("length mismatch: expected {expected} bytes, found {found}")]
    LengthMismatch { expected: u64, found: u64 },

    #[error("sequence too short: need more than {needed} frames, found {found}")]
    TooShort { needed: usize, found: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable numeric code, used as the process exit status by the CLI.
    pub fn code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) => 2,
            Error::NonFinite(_) => 3,
            Error::DimMismatch { .. } => 4,
            Error::BadMagic { .. } => 5,
            Error::LengthMismatch { .. } => 6,
            Error::TooShort { .. } => 7,
            Error::Parse { .. } => 8,
            Error::Undefined(_) => 9,
            Error::Io(_) => 10,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
