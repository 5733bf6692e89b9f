//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by construction, measurement and analysis operations.
#[derive(Debug, Error)]
pub enum EaiError {
    /// Shapes of matrices, vectors or grids do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Non-finite or otherwise unusable numeric data.
    #[error("invalid data: {0}")]
    Data(String),

    /// A documented precondition of an operation was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A measurement protocol requirement was not met (missing phases,
    /// incomplete masks, empty strategies).
    #[error("measurement protocol: {0}")]
    Protocol(String),

    /// A persisted file is malformed or has the wrong magic/kind.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EaiError>;

impl EaiError {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        EaiError::Dimension(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        EaiError::Data(msg.into())
    }

    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        EaiError::Precondition(msg.into())
    }
}
