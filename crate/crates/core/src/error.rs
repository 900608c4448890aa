use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("degree n = {n} outside the supported range {min}..={max}")]
    DegreeOutOfRange { n: usize, min: usize, max: usize },

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("character table for n = {n} failed verification: {reason}")]
    TableVerification { n: usize, reason: String },

    #[error("kronecker coefficient corrupted for {triple}: {reason}")]
    KroneckerCorruption { triple: String, reason: String },

    #[error("class {0} has no samples")]
    EmptyClass(u8),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("encoding mismatch: {model} requires v{expected}, dataset is v{found}")]
    EncodingMismatch { model: String, expected: u8, found: u8 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged: {0}")]
    NonFinite(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format { path: path.into(), reason: reason.into() }
    }
}
