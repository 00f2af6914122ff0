use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use midsmith_core::{ContentAddress, Modality, ModalityScenario};
use serde::{Deserialize, Serialize};

use crate::EvalError;

/// Outcome of one benchmark turn.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnLog {
    pub conversation_id: String,
    /// 1-based turn index.
    pub round: u32,
    pub scenario: ModalityScenario,
    pub predicted_modality: Modality,
    pub expected_modality: Modality,
    /// `predicted_modality == expected_modality`.
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<ContentAddress>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drawing_prompt: Option<String>,
}

impl TurnLog {
    pub fn new(
        conversation_id: impl Into<String>,
        round: u32,
        scenario: ModalityScenario,
        predicted_modality: Modality,
    ) -> Self {
        TurnLog {
            conversation_id: conversation_id.into(),
            round,
            scenario,
            predicted_modality,
            expected_modality: scenario.output,
            correct: predicted_modality == scenario.output,
            image_ref: None,
            drawing_prompt: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.round == 0 {
            return Err("round must be at least 1".into());
        }
        if self.correct != (self.predicted_modality == self.expected_modality) {
            return Err("correct disagrees with predicted/expected modality".into());
        }
        if self.expected_modality != self.scenario.output {
            return Err("expected_modality disagrees with scenario".into());
        }
        Ok(())
    }
}

/// A conversation that could not be completed. Its turns are left out of
/// the metrics.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversationFailure {
    pub conversation_id: String,
    /// Round at which the conversation failed.
    pub round: u32,
    /// Stable error kind, e.g. `backend_unavailable` or `parse_failure`.
    pub kind: String,
    pub error: String,
}

/// One JSONL line of an exported run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogLine {
    Turn(TurnLog),
    Failure(ConversationFailure),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceRun {
    /// Ordered by conversation, then round.
    pub logs: Vec<TurnLog>,
    pub failures: Vec<ConversationFailure>,
}

/// Write turn logs then failures as JSONL.
pub fn write_logs(run: &InferenceRun, path: impl AsRef<Path>) -> Result<(), EvalError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for l in &run.logs {
        serde_json::to_writer(&mut out, l).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    for f in &run.failures {
        serde_json::to_writer(&mut out, f).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Parse JSONL produced by [`write_logs`]. Blank lines are skipped.
pub fn parse_logs(text: &str) -> Result<InferenceRun, EvalError> {
    let mut run = InferenceRun::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| EvalError::MalformedLog { line_no: i + 1, reason };
        match serde_json::from_str::<LogLine>(line).map_err(|e| malformed(e.to_string()))? {
            LogLine::Turn(t) => {
                t.validate().map_err(malformed)?;
                run.logs.push(t);
            }
            LogLine::Failure(f) => run.failures.push(f),
        }
    }
    Ok(run)
}

pub fn read_logs(path: impl AsRef<Path>) -> Result<InferenceRun, EvalError> {
    parse_logs(&fs::read_to_string(path)?)
}
