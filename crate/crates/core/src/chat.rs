//! Chat request carrier shared by the prompt builders and the chat backends.

use serde::{Deserialize, Serialize};

use crate::address::{sha256_hex, ContentAddress};
use crate::model::UserTurnInput;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartKind {
    Text,
    Image,
}

/// One content part. For images, `value` is a content address in-process and
/// a base64 payload on the HTTP wire.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Part {
    pub kind: PartKind,
    pub value: String,
}

impl Part {
    pub fn text(value: impl Into<String>) -> Self {
        Part { kind: PartKind::Text, value: value.into() }
    }

    pub fn image(addr: &ContentAddress) -> Self {
        Part { kind: PartKind::Image, value: addr.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub parts: Vec<Part>,
}

impl ChatMessage {
    pub fn user_text(text: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, parts: vec![Part::text(text)] }
    }

    pub fn assistant_text(text: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, parts: vec![Part::text(text)] }
    }

    /// User message for a turn: the text part, then the image part if any.
    pub fn from_user_turn(user: &UserTurnInput) -> Self {
        let mut parts = vec![Part::text(user.text.clone())];
        if let Some(img) = &user.image_ref {
            parts.push(Part::image(img));
        }
        ChatMessage { role: Role::User, parts }
    }

    /// Concatenation of all text parts.
    pub fn text(&self) -> String {
        self.parts
            .iter()
            .filter(|p| p.kind == PartKind::Text)
            .map(|p| p.value.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RequestError {
    #[error("request has no messages")]
    Empty,
    #[error("message {0} has the wrong role: roles must alternate starting with user")]
    NonAlternating(usize),
    #[error("message {0} has no parts")]
    NoParts(usize),
    #[error("message {index} part {part} has an empty value")]
    EmptyPart { index: usize, part: usize },
}

/// Checks that `messages` alternate user/assistant starting with user.
pub fn check_alternation(messages: &[ChatMessage]) -> Result<(), RequestError> {
    for (i, m) in messages.iter().enumerate() {
        let expected = if i % 2 == 0 { Role::User } else { Role::Assistant };
        if m.role != expected {
            return Err(RequestError::NonAlternating(i));
        }
    }
    Ok(())
}

impl ChatRequest {
    pub fn single(system: Option<String>, user: ChatMessage) -> Self {
        ChatRequest { system, messages: vec![user] }
    }

    pub fn validate(&self) -> Result<(), RequestError> {
        if self.messages.is_empty() {
            return Err(RequestError::Empty);
        }
        check_alternation(&self.messages)?;
        for (i, m) in self.messages.iter().enumerate() {
            if m.parts.is_empty() {
                return Err(RequestError::NoParts(i));
            }
            if let Some(p) = m.parts.iter().position(|p| p.value.is_empty()) {
                return Err(RequestError::EmptyPart { index: i, part: p });
            }
        }
        Ok(())
    }

    /// Canonical JSON bytes; equal requests serialize identically.
    pub fn to_canonical_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("chat requests serialize")
    }

    /// Hex SHA-256 of the canonical JSON. Mock backends key scripts on this.
    pub fn digest(&self) -> String {
        sha256_hex(&self.to_canonical_json())
    }

    pub fn last_user_text(&self) -> Option<String> {
        self.messages.iter().rev().find(|m| m.role == Role::User).map(ChatMessage::text)
    }
}
