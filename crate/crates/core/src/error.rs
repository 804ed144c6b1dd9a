use thiserror::Error;

/// Errors shared by the whole pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An input value violated an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Tensor or image dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A model or run configuration is inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A serialized file (checkpoint, raw image, manifest) is malformed.
    #[error("format error: {0}")]
    Format(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image decode error: {0}")]
    ImageDecode(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
