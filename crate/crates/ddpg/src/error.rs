use thiserror::Error;

#[derive(Debug, Error)]
pub enum DdpgError {
    #[error("input size mismatch: expected {expected}, got {got}")]
    InputSize { expected: usize, got: usize },

    #[error("stale cache: forward pass does not belong to the current parameters")]
    StaleCache,

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("non-finite gradient")]
    NonFiniteGradient,

    #[error("insufficient samples: replay holds {have}, batch needs {need}")]
    InsufficientSamples { have: usize, need: usize },

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("environment failure: {0}")]
    Environment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DdpgError>;
