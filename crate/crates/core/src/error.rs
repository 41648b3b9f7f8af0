//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by graph construction, the engine, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Tensor shapes are incompatible for the requested operation.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A network description failed to parse.
    #[error("config parse error: {0}")]
    ConfigParse(String),

    /// A network description parsed but is semantically invalid.
    #[error("config error: {0}")]
    ConfigInvalid(String),

    /// Parameters required by the network are absent from the weight store.
    #[error("missing weights: {}", .0.join(", "))]
    MissingWeights(Vec<String>),

    /// A weight container file is malformed.
    #[error("weight container error: {0}")]
    Container(String),

    /// A NetPBM file is malformed; the byte offset points at the defect.
    #[error("netpbm error at byte {offset}: {message}")]
    Netpbm { offset: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
