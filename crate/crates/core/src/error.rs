use std::path::PathBuf;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid hyperparameters, shapes or file contents.
    #[error("configuration error: {0}")]
    Config(String),

    /// An API was called in a state where it is not allowed.
    #[error("usage error: {0}")]
    Usage(String),

    /// A text input could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Numerical failure: non-finite values, or an iteration cap was hit.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An internal invariant did not hold.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv { path: path.into(), source }
    }
}
