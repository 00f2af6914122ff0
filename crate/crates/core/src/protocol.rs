//! The output-token protocol between the dialogue engine and its models.
//!
//! A chat model signals a drawing intent by starting its reply with
//! [`DRAW_TOKEN`]; everything after the token is the drawing prompt handed to
//! the text-to-image backend. Self-correction and teacher feedback use a
//! verdict grammar:
//!
//! ```text
//! ###Correct
//! ###Wrong### The output violates rule <n>. <explanation>
//! Correct Solution: <corrected assistant output>
//! ```
//!
//! Prompt concatenation uses labeled sections separated by blank lines:
//! the instruction prompt, an optional `History:` section, then
//! `Question:`, `Original Output:`, and a trailing `Correction:` cue.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::chat::{check_alternation, ChatMessage, ChatRequest, RequestError};
use crate::model::{Modality, UserTurnInput};

pub const DRAW_TOKEN: &str = "<draw>";
pub const CORRECT_MARKER: &str = "###Correct";
pub const WRONG_MARKER: &str = "###Wrong###";
pub const SOLUTION_HEADERS: [&str; 2] = ["Correct Solution:", "Correct solution:"];

pub const HISTORY_HEADER: &str = "History:";
pub const QUESTION_HEADER: &str = "Question:";
pub const ORIGINAL_OUTPUT_HEADER: &str = "Original Output:";
pub const CORRECTION_CUE: &str = "Correction:";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("assistant output is empty")]
    EmptyOutput,
    #[error("history must alternate user/assistant and end with an assistant message: {0}")]
    NonAlternatingHistory(String),
    #[error("{0} must not be empty")]
    EmptyInput(&'static str),
    #[error("unrecognized verdict: {0:?}")]
    UnrecognizedVerdict(String),
    #[error("verdict is Wrong but carries no correct solution")]
    MissingCorrection,
    #[error("verdict is Wrong but names no violated rule")]
    MissingRule,
    #[error("verdict names rule {0}, expected 1, 2 or 3")]
    RuleOutOfRange(u32),
    #[error("invalid templates: {0}")]
    InvalidTemplates(String),
}

// ---------------------------------------------------------------------------
// Templates

/// Prompt texts used by the engine and the offline pipelines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptTemplates {
    /// System prompt for both training and inference.
    pub training_prompt: String,
    /// Self-correction prompt for the second inference step.
    pub correction_prompt: String,
    pub caption_prompt: String,
    /// Teacher instructions with the judging rules and in-context examples.
    pub teacher_fewshot_prompt: String,
    /// Skeleton for benchmark-generation meta prompts. Placeholders:
    /// `{turn_count}`, `{topic}`, `{edit_clause}`, `{language}`,
    /// `{turn_plan}`, `{icl_examples}`.
    pub meta_prompt: String,
    pub intent_judge_prompt: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            training_prompt: include_str!("../templates/training.txt").trim().to_owned(),
            correction_prompt: include_str!("../templates/correction.txt").trim().to_owned(),
            caption_prompt: include_str!("../templates/caption.txt").trim().to_owned(),
            teacher_fewshot_prompt: include_str!("../templates/teacher_fewshot.txt").trim().to_owned(),
            meta_prompt: include_str!("../templates/meta.txt").trim().to_owned(),
            intent_judge_prompt: include_str!("../templates/intent_judge.txt").trim().to_owned(),
        }
    }
}

impl PromptTemplates {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let fields = [
            ("training_prompt", &self.training_prompt),
            ("correction_prompt", &self.correction_prompt),
            ("caption_prompt", &self.caption_prompt),
            ("teacher_fewshot_prompt", &self.teacher_fewshot_prompt),
            ("meta_prompt", &self.meta_prompt),
            ("intent_judge_prompt", &self.intent_judge_prompt),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| v.trim().is_empty()) {
            return Err(ProtocolError::InvalidTemplates(format!("{name} is empty")));
        }
        if !self.training_prompt.contains(DRAW_TOKEN) {
            return Err(ProtocolError::InvalidTemplates(format!(
                "training_prompt must mention {DRAW_TOKEN}"
            )));
        }
        for marker in [CORRECT_MARKER, WRONG_MARKER] {
            if !self.teacher_fewshot_prompt.contains(marker) {
                return Err(ProtocolError::InvalidTemplates(format!(
                    "teacher_fewshot_prompt must contain {marker}"
                )));
            }
        }
        Ok(())
    }

    /// Apply an override document: a JSON object mapping template names to
    /// replacement strings. Unknown names are rejected.
    pub fn with_overrides_json(&self, json: &str) -> Result<Self, ProtocolError> {
        let overrides: BTreeMap<String, String> = serde_json::from_str(json)
            .map_err(|e| ProtocolError::InvalidTemplates(e.to_string()))?;
        let mut out = self.clone();
        for (name, value) in overrides {
            let slot = match name.as_str() {
                "training_prompt" => &mut out.training_prompt,
                "correction_prompt" => &mut out.correction_prompt,
                "caption_prompt" => &mut out.caption_prompt,
                "teacher_fewshot_prompt" => &mut out.teacher_fewshot_prompt,
                "meta_prompt" => &mut out.meta_prompt,
                "intent_judge_prompt" => &mut out.intent_judge_prompt,
                other => {
                    return Err(ProtocolError::InvalidTemplates(format!("unknown template {other:?}")))
                }
            };
            *slot = value;
        }
        out.validate()?;
        Ok(out)
    }

    pub fn load_overrides(path: impl AsRef<Path>) -> Result<Self, ProtocolError> {
        let text = fs::read_to_string(path).map_err(|e| ProtocolError::InvalidTemplates(e.to_string()))?;
        Self::default().with_overrides_json(&text)
    }
}

// ---------------------------------------------------------------------------
// Assistant output

/// A chat-model reply split into its modality and payload.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParsedAssistantOutput {
    pub modality: Modality,
    /// The reply for text turns, the drawing prompt for image turns.
    pub text: String,
}

impl ParsedAssistantOutput {
    pub fn text(text: impl Into<String>) -> Self {
        ParsedAssistantOutput { modality: Modality::Text, text: text.into() }
    }

    pub fn image(prompt: impl Into<String>) -> Self {
        ParsedAssistantOutput { modality: Modality::Image, text: prompt.into() }
    }

    /// True when `parse_output(render_output(self)) == self`.
    pub fn is_valid(&self) -> bool {
        !self.text.is_empty() && self.text.trim() == self.text && !self.text.starts_with(DRAW_TOKEN)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    /// The draw token occurs somewhere other than the start; the reply was
    /// classified as text.
    MisplacedDrawToken { byte_offset: usize },
}

/// Parse a raw completion, also returning diagnostics.
pub fn parse_output_diagnosed(
    raw: &str,
) -> Result<(ParsedAssistantOutput, Option<ParseWarning>), ProtocolError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(ProtocolError::EmptyOutput);
    }
    if trimmed.starts_with(DRAW_TOKEN) {
        let mut rest = trimmed;
        while let Some(r) = rest.strip_prefix(DRAW_TOKEN) {
            rest = r.trim_start();
        }
        if rest.is_empty() {
            return Err(ProtocolError::EmptyOutput);
        }
        return Ok((ParsedAssistantOutput::image(rest), None));
    }
    let warning = trimmed.find(DRAW_TOKEN).map(|byte_offset| ParseWarning::MisplacedDrawToken { byte_offset });
    Ok((ParsedAssistantOutput::text(trimmed), warning))
}

pub fn parse_output(raw: &str) -> Result<ParsedAssistantOutput, ProtocolError> {
    let (parsed, warning) = parse_output_diagnosed(raw)?;
    if let Some(w) = warning {
        tracing::warn!(?w, "draw token not at start of output; treating as text");
    }
    Ok(parsed)
}

pub fn render_output(parsed: &ParsedAssistantOutput) -> String {
    match parsed.modality {
        Modality::Image => format!("{DRAW_TOKEN}{}", parsed.text),
        Modality::Text => parsed.text.clone(),
    }
}

// ---------------------------------------------------------------------------
// Request builders

/// Inference request: the training prompt as system message, the history
/// verbatim, then the new user turn.
pub fn build_inference_request(
    templates: &PromptTemplates,
    history: &[ChatMessage],
    user: &UserTurnInput,
) -> Result<ChatRequest, ProtocolError> {
    if history.len() % 2 == 1 {
        return Err(ProtocolError::NonAlternatingHistory(format!(
            "history has odd length {}",
            history.len()
        )));
    }
    check_alternation(history).map_err(|e: RequestError| ProtocolError::NonAlternatingHistory(e.to_string()))?;
    if user.text.trim().is_empty() {
        return Err(ProtocolError::EmptyInput("user text"));
    }
    let mut messages = history.to_vec();
    messages.push(ChatMessage::from_user_turn(user));
    Ok(ChatRequest { system: Some(templates.training_prompt.clone()), messages })
}

/// Text rendering of a user turn for correction prompts. An attached image is
/// referenced inline as `<img>{address}</img>`.
pub fn render_user_query(user: &UserTurnInput) -> String {
    match &user.image_ref {
        Some(addr) => format!("<img>{addr}</img>{}", user.text),
        None => user.text.clone(),
    }
}

fn sectioned_prompt(lead: &str, history: Option<&str>, q: &str, r: &str) -> Result<String, ProtocolError> {
    if q.trim().is_empty() {
        return Err(ProtocolError::EmptyInput("question"));
    }
    if r.trim().is_empty() {
        return Err(ProtocolError::EmptyInput("original output"));
    }
    let mut out = String::with_capacity(lead.len() + q.len() + r.len() + 64);
    out.push_str(lead);
    if let Some(h) = history {
        let h = if h.trim().is_empty() { "(empty)" } else { h };
        out.push_str(&format!("\n\n{HISTORY_HEADER} {h}"));
    }
    out.push_str(&format!("\n\n{QUESTION_HEADER} {q}\n\n{ORIGINAL_OUTPUT_HEADER} {r}\n\n{CORRECTION_CUE}"));
    Ok(out)
}

/// Self-correction request: correction prompt, question, original output.
pub fn build_correction_request(templates: &PromptTemplates, q: &str, r: &str) -> Result<ChatRequest, ProtocolError> {
    let body = sectioned_prompt(&templates.correction_prompt, None, q, r)?;
    Ok(ChatRequest::single(None, ChatMessage::user_text(body)))
}

/// Teacher request: few-shot teacher prompt, question, original output.
pub fn build_teacher_request(templates: &PromptTemplates, q: &str, r: &str) -> Result<ChatRequest, ProtocolError> {
    let body = sectioned_prompt(&templates.teacher_fewshot_prompt, None, q, r)?;
    Ok(ChatRequest::single(None, ChatMessage::user_text(body)))
}

/// As [`build_teacher_request`], with a `History:` section before the
/// question (`(empty)` when the history is blank).
pub fn build_teacher_request_with_history(
    templates: &PromptTemplates,
    history: &str,
    q: &str,
    r: &str,
) -> Result<ChatRequest, ProtocolError> {
    let body = sectioned_prompt(&templates.teacher_fewshot_prompt, Some(history), q, r)?;
    Ok(ChatRequest::single(None, ChatMessage::user_text(body)))
}

// ---------------------------------------------------------------------------
// Verdicts

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictKind {
    Correct,
    Wrong,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorrectionVerdict {
    pub kind: VerdictKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violated_rule: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_output: Option<String>,
}

impl CorrectionVerdict {
    pub fn correct() -> Self {
        CorrectionVerdict { kind: VerdictKind::Correct, violated_rule: None, explanation: None, corrected_output: None }
    }

    pub fn wrong(rule: u8, explanation: impl Into<String>, corrected_output: impl Into<String>) -> Self {
        CorrectionVerdict {
            kind: VerdictKind::Wrong,
            violated_rule: Some(rule),
            explanation: Some(explanation.into()),
            corrected_output: Some(corrected_output.into()),
        }
    }

    pub fn is_well_formed(&self) -> bool {
        match self.kind {
            VerdictKind::Correct => {
                self.violated_rule.is_none() && self.explanation.is_none() && self.corrected_output.is_none()
            }
            VerdictKind::Wrong => {
                matches!(self.violated_rule, Some(1..=3))
                    && self.explanation.is_some()
                    && self.corrected_output.as_deref().is_some_and(|c| !c.trim().is_empty())
            }
        }
    }
}

fn rule_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\brule\s*#?\s*(\d+)").expect("valid regex"))
}

fn verdict_prefix(s: &str) -> String {
    s.chars().take(40).collect()
}

pub fn parse_teacher_verdict(raw: &str) -> Result<CorrectionVerdict, ProtocolError> {
    let trimmed = raw.trim();
    if trimmed.starts_with(CORRECT_MARKER) {
        return Ok(CorrectionVerdict::correct());
    }
    let Some(body) = trimmed.strip_prefix(WRONG_MARKER) else {
        return Err(ProtocolError::UnrecognizedVerdict(verdict_prefix(trimmed)));
    };
    let (header_at, header_len) = SOLUTION_HEADERS
        .iter()
        .filter_map(|h| body.find(h).map(|i| (i, h.len())))
        .min_by_key(|(i, _)| *i)
        .ok_or(ProtocolError::MissingCorrection)?;
    let corrected = body[header_at + header_len..].trim();
    if corrected.is_empty() {
        return Err(ProtocolError::MissingCorrection);
    }
    let before = &body[..header_at];
    let caps = rule_regex().captures(before).ok_or(ProtocolError::MissingRule)?;
    let rule: u32 = caps[1].parse().map_err(|_| ProtocolError::MissingRule)?;
    if !(1..=3).contains(&rule) {
        return Err(ProtocolError::RuleOutOfRange(rule));
    }
    let after_rule = &before[caps.get(0).expect("whole match").end()..];
    let explanation = after_rule
        .trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '.' | ':' | ',' | ';' | ')'))
        .trim_end();
    Ok(CorrectionVerdict::wrong(rule as u8, explanation, corrected))
}

/// Inverse of [`parse_teacher_verdict`] for well-formed verdicts.
pub fn render_verdict(v: &CorrectionVerdict) -> String {
    match v.kind {
        VerdictKind::Correct => CORRECT_MARKER.to_owned(),
        VerdictKind::Wrong => {
            let explanation = v.explanation.as_deref().unwrap_or("");
            let sep = if explanation.is_empty() { "" } else { " " };
            format!(
                "{WRONG_MARKER} The output violates rule {}.{sep}{explanation}\n{} {}",
                v.violated_rule.unwrap_or(0),
                SOLUTION_HEADERS[0],
                v.corrected_output.as_deref().unwrap_or("")
            )
        }
    }
}
