use std::path::PathBuf;

/// Errors produced by the simulation, reconstruction and learning code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("measurement error: {0}")]
    Measurement(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($arg:tt)*) => {
        if !$cond {
            return Err($crate::Error::$variant(format!($($arg)*)));
        }
    };
}
pub(crate) use ensure;
