#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no turn logs to score")]
    EmptyLogs,
    #[error("no expected-image turns with VQA questions to score")]
    NothingToScore,
    #[error("log for {conversation_id} round {round} does not match the dataset: {reason}")]
    LogMismatch { conversation_id: String, round: u32, reason: String },
    #[error("line {line_no}: {reason}")]
    MalformedLog { line_no: usize, reason: String },
    #[error(transparent)]
    Dataset(#[from] midsmith_core::DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
