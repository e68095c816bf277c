use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("{op} needs spatial size of at least {min}x{min}, got {height}x{width}; stop adding blocks")]
    SpatialTooSmall {
        op: &'static str,
        min: usize,
        height: usize,
        width: usize,
    },

    #[error("image of {height}x{width} cannot pass {blocks} blocks with kernel size {kernel_size}; at most {max_blocks} blocks fit")]
    ImageTooSmall {
        height: usize,
        width: usize,
        kernel_size: usize,
        blocks: usize,
        max_blocks: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}: corrupt header: {reason}", path.display())]
    CorruptHeader { path: PathBuf, reason: String },

    #[error("{}: unsupported version {version}", path.display())]
    UnsupportedVersion { path: PathBuf, version: u32 },

    #[error("{}: size mismatch: header implies {expected} bytes, file has {actual}", path.display())]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("{}: decode error at byte {offset}: {reason}", path.display())]
    Decode {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
