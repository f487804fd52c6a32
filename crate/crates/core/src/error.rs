use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}:{line}: {what} id {id} out of range (declared {declared})", path.display())]
    Range {
        path: PathBuf,
        line: usize,
        what: &'static str,
        id: u64,
        declared: usize,
    },

    #[error("unknown {what} name {name:?}")]
    UnknownName { what: &'static str, name: String },

    #[error("could not sample a negative for {triple} after {attempts} attempts")]
    SamplingExhausted { triple: String, attempts: usize },

    #[error("non-finite gradient while training on {triple} ({detail})")]
    NonFinite { triple: String, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid dataset request: {0}")]
    Dataset(String),

    #[error("{0}")]
    Eval(String),

    #[error("checkpoint {}: {message}", path.display())]
    Checkpoint { path: PathBuf, message: String },

    #[error("json {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Numerical aborts are distinguished from data errors by the CLI.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. })
    }
}
