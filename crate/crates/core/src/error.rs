use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point is behind the camera (camera-frame depth {depth})")]
    BehindCamera { depth: f64 },

    #[error("backend unavailable: {transcript}")]
    BackendUnavailable { transcript: String },

    #[error("oracle frame missing: {}", path.display())]
    OracleMiss { path: PathBuf },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn backend(transcript: impl Into<String>) -> Self {
        Error::BackendUnavailable {
            transcript: transcript.into(),
        }
    }
}
