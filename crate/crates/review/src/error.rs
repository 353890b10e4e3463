use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("not found: {0}")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("bad request: {0}")]
    BadRequest(String),

    /// Trigger logs, traces, labels or the verdict log could not be loaded.
    #[error("bad input: {0}")]
    BadInput(String),

    #[error(transparent)]
    Core(#[from] surprise_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ReviewError>;
