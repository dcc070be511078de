use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("image has a zero dimension ({height}x{width})")]
    EmptyImage { height: usize, width: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("pruning budget of {budget} parameters is below the {dense} parameters of the dense first and last layers")]
    BudgetTooSmall { budget: usize, dense: usize },

    #[error("architecture does not fit the file header: {0}")]
    HeaderRange(String),

    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// Reasons a `.l0ne` byte stream is rejected.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("bad magic bytes {0:02x?}")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),

    #[error("unsupported precision tag {0}")]
    UnsupportedPrecision(u8),

    #[error("stream truncated: needed {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },

    #[error("mask selects {mask} parameters but payload carries {payload_bytes} bytes")]
    CountMismatch { mask: usize, payload_bytes: usize },

    #[error("non-canonical stream: {0}")]
    NonCanonical(&'static str),

    #[error("unsupported architecture: {0}")]
    Architecture(String),
}
