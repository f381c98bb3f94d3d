use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulation, correlation and authentication layers.
#[derive(Debug, Error)]
pub enum OseError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input is structurally valid but carries no information (constant image, zero variance).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An optical configuration that cannot be simulated faithfully.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("score populations are not separable: min genuine {min_genuine} <= max impostor {max_impostor}")]
    NonSeparable { min_genuine: f64, max_impostor: f64 },

    #[error("malformed data in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = OseError> = std::result::Result<T, E>;

impl OseError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        OseError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        OseError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        OseError::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
