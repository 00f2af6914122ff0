use midsmith_backends::BackendError;
use midsmith_core::dataset::VocabularyError;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ForgeError {
    #[error("turn count {0} outside 1..=6")]
    TurnCountOutOfRange(usize),
    #[error(transparent)]
    VocabularyMiss(#[from] VocabularyError),
    #[error("requested {requested} samples from a corpus of {available}")]
    InsufficientCorpus { requested: usize, available: usize },
    #[error("need {needed} single-turn samples, pool has {available}")]
    PoolTooSmall { needed: usize, available: usize },
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One failed item of a batch, by input position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub index: usize,
    /// What the item was, e.g. an image address.
    pub item: String,
    /// Stable error kind, e.g. `script_miss`.
    pub kind: String,
    pub message: String,
}

impl ItemFailure {
    pub fn new(index: usize, item: impl Into<String>, error: &BackendError) -> Self {
        ItemFailure { index, item: item.into(), kind: error.kind().to_owned(), message: error.to_string() }
    }
}
