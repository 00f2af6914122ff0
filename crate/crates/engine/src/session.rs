use chrono::{DateTime, Utc};
use midsmith_core::address::digest_u64;
use midsmith_core::chat::{ChatMessage, Part, Role};
use midsmith_core::protocol::render_output;
use midsmith_core::{GeneratedImage, Modality, ParsedAssistantOutput, UserTurnInput};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::engine::CorrectionTrace;

/// Seed derived from a session or conversation id: the first 64 bits of its SHA-256.
pub fn derive_seed(id: &str) -> u64 {
    digest_u64(id.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub user: UserTurnInput,
    pub assistant: ParsedAssistantOutput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<GeneratedImage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correction_trace: Option<CorrectionTrace>,
}

/// Live dialogue state. The seed never changes after creation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    id: String,
    seed: u64,
    history: Vec<HistoryEntry>,
    created_at: DateTime<Utc>,
}

impl Session {
    /// Fresh session with a random UUID.
    pub fn new(seed_override: Option<u64>) -> Self {
        Self::with_id(Uuid::new_v4().to_string(), seed_override)
    }

    /// Session with a caller-chosen id; the seed is derived from it unless overridden.
    pub fn with_id(id: impl Into<String>, seed_override: Option<u64>) -> Self {
        let id = id.into();
        let seed = seed_override.unwrap_or_else(|| derive_seed(&id));
        Session { id, seed, history: Vec::new(), created_at: Utc::now() }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub(crate) fn push(&mut self, entry: HistoryEntry) {
        debug_assert_eq!(entry.assistant.modality == Modality::Image, entry.image.is_some());
        self.history.push(entry);
    }

    /// History as alternating chat messages.
    pub fn chat_history(&self, images_as_parts: bool) -> Vec<ChatMessage> {
        let mut out = Vec::with_capacity(self.history.len() * 2);
        for e in &self.history {
            out.push(ChatMessage::from_user_turn(&e.user));
            let mut parts = vec![Part::text(render_output(&e.assistant))];
            if images_as_parts {
                if let Some(img) = &e.image {
                    parts.push(Part::image(&img.content_address));
                }
            }
            out.push(ChatMessage { role: Role::Assistant, parts });
        }
        out
    }

    /// Immutable copy of the transcript.
    pub fn snapshot(&self) -> Vec<TranscriptEntry> {
        self.history.iter().map(TranscriptEntry::from).collect()
    }
}

/// One exchange as shown to clients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub user_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_image: Option<String>,
    pub modality: Modality,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correction_trace: Option<CorrectionTrace>,
}

impl From<&HistoryEntry> for TranscriptEntry {
    fn from(e: &HistoryEntry) -> Self {
        TranscriptEntry {
            user_text: e.user.text.clone(),
            user_image: e.user.image_ref.as_ref().map(|a| a.to_string()),
            modality: e.assistant.modality,
            text: e.assistant.text.clone(),
            image: e.image.as_ref().map(|i| i.content_address.to_string()),
            correction_trace: e.correction_trace.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds() {
        let a = Session::new(None);
        let b = Session::new(None);
        assert_ne!(a.id(), b.id());
        assert_eq!(Session::new(Some(42)).seed(), 42);
        let s = Session::with_id("conv-1", None);
        assert_eq!(s.seed(), derive_seed("conv-1"));
        assert_eq!(Session::with_id("conv-1", None).seed(), s.seed());
    }

    #[test]
    fn derived_seed_is_digest_prefix() {
        // sha256("abc") = ba7816bf8f01cfea...
        assert_eq!(derive_seed("abc"), 0xba7816bf8f01cfea);
    }

    #[test]
    fn empty_snapshot() {
        assert!(Session::new(None).snapshot().is_empty());
    }
}
