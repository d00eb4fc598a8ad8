//! Crate-wide error type. Fallible operations return [`Result`].

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value is outside its valid range or internally
    /// inconsistent (bad filter band, zero rate, impossible model shape).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Input data violates a precondition (empty series, all samples
    /// missing, mismatched lengths, labels outside {-1, +1}).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two devices could not be aligned: the overlap is too short for the
    /// requested lag range.
    #[error("alignment failed: {0}")]
    AlignmentFailed(String),

    /// A text or binary artifact on disk does not match its format
    /// (native channel files, annotation files, caches, checkpoints).
    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Training diverged: the loss became non-finite.
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    /// An operation was invoked out of order (e.g. backward without a
    /// preceding forward pass).
    #[error("invalid call sequence: {0}")]
    State(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
