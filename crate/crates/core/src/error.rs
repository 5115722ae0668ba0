use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the structal library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("validation error in sentence {sentence}: {message}")]
    Validation { sentence: String, message: String },

    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },

    #[error("infeasible constraints: {0}")]
    Constraint(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("training diverged at step {step}: loss is {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("malformed parameter snapshot: {0}")]
    Snapshot(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn validation(sentence: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            sentence: sentence.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
