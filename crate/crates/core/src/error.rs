use std::path::PathBuf;

/// Errors raised anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch on {axis}: expected {expected}, got {got}")]
    Shape {
        axis: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid size: {0}")]
    Size(String),

    #[error("numeric consistency: {0}")]
    Numeric(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("parse error in {file} at offset {offset}: {msg}")]
    Parse {
        file: PathBuf,
        offset: usize,
        msg: String,
    },

    #[error("missing artifact: {0}")]
    Missing(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<PathBuf>, offset: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            offset,
            msg: msg.into(),
        }
    }

    /// Process exit code for the command-line front end: 2 usage, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid(_) => 2,
            Error::Parse { .. } | Error::Missing(_) | Error::Io { .. } => 3,
            Error::Shape { .. } | Error::Size(_) | Error::Numeric(_) => 4,
        }
    }
}
