//! JSON bodies of the HTTP API.

use std::path::PathBuf;

use chrono::{DateTime, Utc};
use midsmith_core::{ContentAddress, Modality};
use midsmith_engine::{AssistantResult, CorrectionTrace, TranscriptEntry};
use serde::{Deserialize, Serialize};

pub fn image_url(addr: &str) -> String {
    format!("/images/{addr}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub version: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateSession {
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostMessage {
    pub text: String,
    /// Optional user image, base64 encoded.
    #[serde(default)]
    pub image_b64: Option<String>,
}

/// Reply to one user turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageReply {
    pub modality: Modality,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_url: Option<String>,
    /// Present exactly when `modality` is image; equal to `text`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drawing_prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correction_trace: Option<CorrectionTrace>,
}

impl From<AssistantResult> for MessageReply {
    fn from(r: AssistantResult) -> Self {
        let is_image = r.modality == Modality::Image;
        MessageReply {
            modality: r.modality,
            image_url: r.image.map(|i| image_url(i.content_address.as_str())),
            drawing_prompt: is_image.then(|| r.text.clone()),
            text: r.text,
            correction_trace: r.correction_trace,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TranscriptRole {
    User,
    Assistant,
}

/// One transcript bubble. Assistant image entries carry both `image_url`
/// and `drawing_prompt`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptItem {
    pub role: TranscriptRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drawing_prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correction_trace: Option<CorrectionTrace>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    pub session_id: String,
    pub seed: u64,
    pub entries: Vec<TranscriptItem>,
}

impl History {
    pub fn new(session_id: String, seed: u64, transcript: Vec<TranscriptEntry>) -> Self {
        let mut entries = Vec::with_capacity(transcript.len() * 2);
        for t in transcript {
            entries.push(TranscriptItem {
                role: TranscriptRole::User,
                modality: None,
                text: t.user_text,
                image_url: t.user_image.as_deref().map(image_url),
                drawing_prompt: None,
                correction_trace: None,
            });
            let is_image = t.modality == Modality::Image;
            entries.push(TranscriptItem {
                role: TranscriptRole::Assistant,
                modality: Some(t.modality),
                drawing_prompt: is_image.then(|| t.text.clone()),
                text: t.text,
                image_url: t.image.as_deref().map(image_url),
                correction_trace: t.correction_trace,
            });
        }
        History { session_id, seed, entries }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRequest {
    pub dataset_path: PathBuf,
    #[serde(default)]
    pub coherence: bool,
    #[serde(default)]
    pub two_step: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalAccepted {
    pub job_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalJob {
    pub id: String,
    pub state: JobState,
    pub dataset_path: PathBuf,
    pub coherence: bool,
    pub two_step: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Parsed `report.json`, attached once the job is done.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    /// Stable kind, e.g. `busy`, `not_found` or a backend error kind.
    pub error: String,
    pub message: String,
}

/// Parse an address from a URL segment.
pub fn parse_address(s: &str) -> Option<ContentAddress> {
    ContentAddress::parse(s).ok()
}
