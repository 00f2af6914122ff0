//! Intent-mismatch filtering of benchmark conversations.

use midsmith_backends::{BackendError, ChatBackend};
use midsmith_core::chat::{ChatMessage, ChatRequest, Part, Role};
use midsmith_core::{ConversationRecord, Modality, PromptTemplates};
use serde::{Deserialize, Serialize};

use crate::fanout;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnMismatch {
    pub turn_index: usize,
    pub judged: Modality,
    pub expected: Modality,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub record: ConversationRecord,
    pub mismatches: Vec<TurnMismatch>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Undecided {
    pub record: ConversationRecord,
    pub turn_index: usize,
    pub error: String,
}

/// Partition of the input. Each bucket keeps input order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentFilterOutcome {
    pub kept: Vec<ConversationRecord>,
    pub rejected: Vec<Rejection>,
    pub undecided: Vec<Undecided>,
}

/// The judge request for turn `turn_index` of `record`. Earlier user turns
/// are quoted as context; the judged turn carries its image, if any.
pub fn judge_request(templates: &PromptTemplates, record: &ConversationRecord, turn_index: usize) -> ChatRequest {
    let turn = &record.turns[turn_index];
    let mut text = String::new();
    if turn_index > 0 {
        text.push_str("Earlier user instructions:\n");
        for (i, t) in record.turns[..turn_index].iter().enumerate() {
            text.push_str(&format!("{}. {}\n", i + 1, t.user.text));
        }
        text.push('\n');
    }
    text.push_str("Latest instruction: ");
    text.push_str(&turn.user.text);
    let mut parts = vec![Part::text(text)];
    if let Some(img) = &turn.user.image_ref {
        parts.push(Part::image(img));
    }
    ChatRequest { system: Some(templates.intent_judge_prompt.clone()), messages: vec![ChatMessage { role: Role::User, parts }] }
}

/// Read a one-word IMAGE/TEXT verdict. Case and trailing punctuation are
/// ignored.
pub fn parse_judgement(raw: &str) -> Result<Modality, BackendError> {
    let word = raw.split_whitespace().next().unwrap_or("").trim_matches(|c: char| !c.is_ascii_alphabetic());
    match word.to_ascii_uppercase().as_str() {
        "IMAGE" => Ok(Modality::Image),
        "TEXT" => Ok(Modality::Text),
        _ => Err(BackendError::MalformedResponse(format!("judge answered {raw:?}"))),
    }
}

async fn judge_record(
    record: &ConversationRecord,
    judge: &dyn ChatBackend,
    templates: &PromptTemplates,
) -> Result<Vec<TurnMismatch>, (usize, BackendError)> {
    let mut mismatches = Vec::new();
    for (i, turn) in record.turns.iter().enumerate() {
        let raw = judge.complete(&judge_request(templates, record, i)).await.map_err(|e| (i, e))?;
        let judged = parse_judgement(&raw).map_err(|e| (i, e))?;
        if judged != turn.expected_modality {
            mismatches.push(TurnMismatch { turn_index: i, judged, expected: turn.expected_modality });
        }
    }
    Ok(mismatches)
}

/// Ask `judge` whether each turn's instruction implies an image or a text
/// answer. A record is rejected when any turn disagrees with its label and
/// goes to `undecided` when the judge fails on any turn.
pub async fn filter_intent_mismatch(
    records: &[ConversationRecord],
    judge: &dyn ChatBackend,
    templates: &PromptTemplates,
    parallelism: usize,
) -> IntentFilterOutcome {
    let verdicts = fanout::ordered(records, parallelism, |r| judge_record(r, judge, templates)).await;
    let mut out = IntentFilterOutcome::default();
    for (record, verdict) in records.iter().zip(verdicts) {
        match verdict {
            Ok(m) if m.is_empty() => out.kept.push(record.clone()),
            Ok(mismatches) => out.rejected.push(Rejection { record: record.clone(), mismatches }),
            Err((turn_index, e)) => {
                out.undecided.push(Undecided { record: record.clone(), turn_index, error: e.to_string() })
            }
        }
    }
    out
}
