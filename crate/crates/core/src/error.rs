use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed alist input, with the 1-based line the problem was found on.
    #[error("alist line {line}: {msg}")]
    Alist { line: usize, msg: String },

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("invalid decoder configuration: {0}")]
    Config(String),

    #[error("invalid error pattern: {0}")]
    Pattern(String),

    #[error("rank {rank} out of range for C({n}, {weight})")]
    RankOutOfRange { n: usize, weight: usize, rank: u128 },

    #[error("invalid estimator input: {0}")]
    Estimator(String),

    #[error("crossover probability {0} outside [0, 1)")]
    Epsilon(f64),

    #[error("calibration rejected: {0}")]
    Calibration(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("artifact mismatch: {0}")]
    Mismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn alist(line: usize, msg: impl Into<String>) -> Self {
        Error::Alist {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
