//! JSON bodies of the backend HTTP protocol.
//!
//! | endpoint | request | response |
//! |---|---|---|
//! | `POST {base}/chat` | `{system?, messages: [{role, parts: [{kind, value}]}]}` | `{content}` |
//! | `POST {base}/t2i` | `{prompt, seed, width, height}` | `{image_b64, mime}` |
//! | `POST {base}/vqa` | `{image_b64, question, answer}` | `{prob}` |
//!
//! On the wire, image parts carry base64 payloads instead of content
//! addresses. Every request has an `x-request-id` header that stays the same
//! across retries.

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::{check_probability, BackendError};

pub const REQUEST_ID_HEADER: &str = "x-request-id";

pub(crate) fn b64() -> base64::engine::GeneralPurpose {
    base64::engine::general_purpose::STANDARD
}

pub fn encode_b64(bytes: &[u8]) -> String {
    b64().encode(bytes)
}

pub fn decode_b64(s: &str) -> Result<Vec<u8>, BackendError> {
    b64().decode(s).map_err(|e| BackendError::MalformedResponse(format!("bad base64: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponseBody {
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2iRequestBody {
    pub prompt: String,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2iResponseBody {
    pub image_b64: String,
    #[serde(default)]
    pub mime: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaRequestBody {
    pub image_b64: String,
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaResponseBody {
    pub prob: f64,
}

fn malformed(e: serde_json::Error) -> BackendError {
    BackendError::MalformedResponse(e.to_string())
}

pub fn decode_chat_response(body: &[u8]) -> Result<String, BackendError> {
    let r: ChatResponseBody = serde_json::from_slice(body).map_err(malformed)?;
    Ok(r.content)
}

/// Decoded image bytes and the declared MIME type, if any.
pub fn decode_t2i_response(body: &[u8]) -> Result<(Vec<u8>, Option<String>), BackendError> {
    let r: T2iResponseBody = serde_json::from_slice(body).map_err(malformed)?;
    let bytes = decode_b64(&r.image_b64)?;
    if bytes.is_empty() {
        return Err(BackendError::MalformedResponse("empty image payload".into()));
    }
    Ok((bytes, r.mime))
}

/// Probability from a VQA response; values outside `[0, 1]` are rejected.
pub fn decode_vqa_response(body: &[u8]) -> Result<f64, BackendError> {
    let r: VqaResponseBody = serde_json::from_slice(body).map_err(malformed)?;
    check_probability(r.prob)
}
