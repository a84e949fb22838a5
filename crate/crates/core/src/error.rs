use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric failure at iteration {iteration}: {message}")]
    Numeric { iteration: usize, message: String },

    /// All coarse scores are identical, so there is nothing to learn from.
    #[error("degenerate sample partition: coarse scores have zero variance")]
    DegeneratePartition,

    #[error("internal error: {0}")]
    Internal(String),

    #[error("config {path}:{line}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numeric(iteration: usize, msg: impl Into<String>) -> Self {
        Error::Numeric {
            iteration,
            message: msg.into(),
        }
    }
}
