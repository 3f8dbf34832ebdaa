use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed image header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },

    #[error("unsupported image: {0}")]
    Unsupported(String),

    #[error("png decode/encode failure: {0}")]
    Png(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("dense oracle limited to {cap} pixels, image has {pixels}")]
    OracleCapExceeded { pixels: usize, cap: usize },

    #[error("degenerate graph: {0}")]
    Degenerate(String),

    #[error("eigensolver failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
