//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated an operation's preconditions.
    #[error("rejected input: {0}")]
    RejectedInput(String),

    /// Shapes of two operands do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A non-finite value appeared mid-computation.
    #[error("non-finite value in layer {layer}: {context}")]
    NonFinite { layer: usize, context: String },

    /// A text input could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// Configuration failed validation; every problem is listed.
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    /// Malformed binary weight bundle.
    #[error("weight bundle: {0}")]
    WeightBundle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn rejected(msg: impl Into<String>) -> Self {
        Error::RejectedInput(msg.into())
    }

    pub fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
