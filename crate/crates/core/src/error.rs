use std::io;
use std::path::Path;

use snowv_ml::MlError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} must be {expected} bytes, got {actual}")]
    InvalidLength {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid leak model: {0}")]
    InvalidModel(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("trace file format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },
    #[error("cannot access {path}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("no finite trace count reaches the target at p = {p}")]
    NoConvergence { p: f64 },
    #[error("cannot parse {0}")]
    Parse(String),
    #[error("incompatible inputs: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Ml(#[from] MlError),
}

impl Error {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn with_path(self, path: &Path) -> Self {
        match self {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        }
    }
}
