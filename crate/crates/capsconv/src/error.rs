use thiserror::Error;

/// Errors shared by every engine and lowering stage.
#[derive(Debug, Error)]
pub enum CapsError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index out of bounds: {0}")]
    Bounds(String),
    #[error("non-finite scalar at flat index {index}")]
    NonFinite { index: usize },
    #[error("tape does not match network state: {0}")]
    TapeMismatch(String),
}

pub type Result<T> = std::result::Result<T, CapsError>;

impl CapsError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        CapsError::Shape(msg.into())
    }

    pub(crate) fn bounds(msg: impl Into<String>) -> Self {
        CapsError::Bounds(msg.into())
    }
}
