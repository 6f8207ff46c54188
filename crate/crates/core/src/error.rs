use std::path::PathBuf;

use crate::codebook::Band;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus contains no usable messages")]
    EmptyCorpus,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("band {band} holds {found} eligible words, {needed} needed")]
    InsufficientBand {
        band: Band,
        found: usize,
        needed: usize,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("steganization failed after {attempts} attempts")]
    SteganizationFailed { attempts: usize },

    #[error("no insertion position in range")]
    NoPosition,

    #[error("domain error: {0}")]
    Domain(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
