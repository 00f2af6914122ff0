use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend timed out")]
    Timeout,
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("no scripted response for {0}")]
    ScriptMiss(String),
    #[error("prompt rejected by safety filter: {0}")]
    SafetyRejection(String),
    #[error("image not found: {0}")]
    ImageNotFound(String),
    #[error("backend rejected request with status {status}: {message}")]
    Rejected { status: u16, message: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    /// Stable snake_case identifier, used in gateway error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            BackendError::Unavailable(_) => "backend_unavailable",
            BackendError::Timeout => "timeout",
            BackendError::MalformedResponse(_) => "malformed_response",
            BackendError::ScriptMiss(_) => "script_miss",
            BackendError::SafetyRejection(_) => "safety_rejection",
            BackendError::ImageNotFound(_) => "image_not_found",
            BackendError::Rejected { .. } => "rejected",
            BackendError::InvalidRequest(_) => "invalid_request",
            BackendError::Config(_) => "config",
        }
    }
}
