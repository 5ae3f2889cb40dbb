use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed token {text:?}: {reason}")]
    Token { text: String, reason: String },

    #[error("invalid trace: {0}")]
    Trace(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("vocabulary has {0} tokens, at least 2 are required")]
    VocabularyTooSmall(usize),

    #[error("token {0:?} has a zero-norm embedding")]
    ZeroNorm(String),

    #[error("token {0:?} never occurs in the corpus")]
    ZeroOccurrences(String),

    #[error("token {0:?} is missing from the distance matrix")]
    MissingToken(String),

    #[error("distance matrices have different vocabularies")]
    VocabMismatch,

    #[error("token {0:?} is both a pattern term and a noise name")]
    VocabularyCollision(String),

    #[error("{0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Token { .. } => "token",
            Error::Trace(_) => "trace",
            Error::EmptyCorpus => "empty-corpus",
            Error::Config(_) => "config",
            Error::VocabularyTooSmall(_) => "vocabulary",
            Error::ZeroNorm(_) => "zero-norm",
            Error::ZeroOccurrences(_) => "zero-occurrences",
            Error::MissingToken(_) => "missing-token",
            Error::VocabMismatch => "vocab-mismatch",
            Error::VocabularyCollision(_) => "collision",
            Error::Format(_) => "format",
        }
    }

    /// Line number for parse errors.
    pub fn line(&self) -> Option<usize> {
        match self {
            Error::Parse { line, .. } => Some(*line),
            _ => None,
        }
    }
}
