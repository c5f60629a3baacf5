use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: empty KB")]
    EmptyKb { path: PathBuf },

    #[error("{path}: empty corpus")]
    EmptyCorpus { path: PathBuf },

    #[error("invalid template: {0}")]
    Template(String),

    #[error("no covered tokens in {0:?}")]
    NoCoveredTokens(String),

    #[error("zero-norm vector")]
    ZeroNorm,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("text is empty after normalization")]
    EmptyText,

    #[error("token {0:?} is not in the vocabulary and the model has no <unk>")]
    Oov(String),

    #[error("transport failure for query {query:?}: {message}")]
    Transport { query: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: crate::pipeline::Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Transport failures are recoverable: the expansion loop skips the query.
    pub fn is_transport(&self) -> bool {
        matches!(self, Error::Transport { .. })
    }
}
