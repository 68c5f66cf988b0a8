use std::path::PathBuf;

use thiserror::Error;

use crate::oracle::OracleError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty history")]
    EmptyHistory,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Oracle(#[from] OracleError),

    #[error("oracle proposed {got} candidates, {expected} requested")]
    ShortCandidates { expected: usize, got: usize },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
