use std::io;
use std::path::PathBuf;

use rdcnn::Error as CoreError;
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),

    /// Flags that parse but do not make sense together.
    #[error("{0}")]
    Usage(String),

    /// Inputs that load but cannot be used for the requested run.
    #[error("{0}")]
    Invalid(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Csv { .. } => 3,
            CliError::Invalid(_) => 5,
            CliError::Core(e) => match e {
                CoreError::Io { .. } => 3,
                CoreError::CorruptHeader { .. }
                | CoreError::UnsupportedVersion { .. }
                | CoreError::SizeMismatch { .. }
                | CoreError::Decode { .. }
                | CoreError::Csv { .. } => 4,
                CoreError::DimensionMismatch { .. }
                | CoreError::NonFinite { .. }
                | CoreError::SpatialTooSmall { .. }
                | CoreError::ImageTooSmall { .. }
                | CoreError::InvalidArgument(_) => 5,
            },
        }
    }
}
