use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::EmotionLabel;

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
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate turn {turn_index} in conversation {conversation_id:?}")]
    DuplicateTurn {
        conversation_id: String,
        turn_index: usize,
    },

    #[error("conversation {conversation_id:?}: turn indices are not dense from 0 (missing {missing})")]
    SparseTurns {
        conversation_id: String,
        missing: usize,
    },

    #[error("utterance {0:?} not found in split")]
    TargetNotFound(String),

    #[error("unknown label scheme {0:?}")]
    UnknownScheme(String),

    #[error("invalid label scheme: {0}")]
    InvalidScheme(String),

    #[error("text must be non-empty after trimming")]
    EmptyText,

    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cannot normalize an all-zero or non-finite vector")]
    DegenerateVector,

    #[error("index is empty")]
    EmptyIndex,

    #[error("k must be positive")]
    ZeroK,

    #[error("duplicate example id {0:?} in index")]
    DuplicateId(String),

    #[error("transport failure: {message}")]
    Transport { message: String, retryable: bool },

    #[error("malformed backend response: {0}")]
    MalformedResponse(String),

    #[error("no reference examples labelled {0}")]
    EmptyBucket(EmotionLabel),

    #[error("unsupported store version {found} (expected {expected})")]
    StoreVersion { found: u32, expected: u32 },

    #[error("store checksum mismatch: {0}")]
    StoreChecksum(String),

    #[error("corrupt store: {0}")]
    StoreCorrupt(String),

    #[error("AER round {0} out of range 0..=4")]
    RoundOutOfRange(usize),

    #[error("strategy {0} requires an example slate")]
    MissingSlate(&'static str),

    #[error("strategy {0} must not be given an example slate")]
    UnexpectedSlate(&'static str),

    #[error("unknown transcript variant {0:?}")]
    UnknownVariant(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("reports are not comparable: {0}")]
    Incomparable(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Transport { retryable: true, .. })
    }
}
