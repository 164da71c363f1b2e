use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the kernel library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of bounds for axis {axis} of length {len}")]
    OutOfBounds {
        axis: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("label parse error at line {line}: {reason}")]
    LabelParse { line: usize, reason: String },

    #[error("checksum mismatch in bench case {case}: serial {serial:016x}, parallel {parallel:016x}")]
    ChecksumMismatch {
        case: String,
        serial: u64,
        parallel: u64,
    },

    #[error("unsupported image format: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
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
