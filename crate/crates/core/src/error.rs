use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (non-edge pair, unassigned
    /// clique member, illegal action, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("stale intermediates: {0}")]
    Stale(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("unsupported instance: {0}")]
    Unsupported(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{0}")]
    Format(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short category name, used by the CLI for its error prefix.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Contract(_) => "contract",
            Error::InvalidInstance(_) => "instance",
            Error::InvalidConfig(_) => "config",
            Error::Shape(_) => "shape",
            Error::Stale(_) => "stale",
            Error::NonFinite(_) => "numeric",
            Error::Unsupported(_) => "unsupported",
            Error::Parse { .. } | Error::Format(_) => "parse",
            Error::Io { .. } | Error::Csv(_) => "io",
        }
    }
}
