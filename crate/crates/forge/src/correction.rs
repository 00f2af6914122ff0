//! Teacher-labelled correction data.

use std::io::Write;

use midsmith_backends::ChatBackend;
use midsmith_core::protocol::{build_teacher_request, build_teacher_request_with_history, parse_teacher_verdict};
use midsmith_core::{CorrectionVerdict, PromptTemplates, VerdictKind};
use serde::{Deserialize, Serialize};

use crate::{fanout, ForgeError};

/// A question and the reply to be judged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionInput {
    /// Rendered earlier turns. When present the teacher prompt gets a
    /// `History:` section.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<String>,
    pub question: String,
    pub original_output: String,
}

impl CorrectionInput {
    pub fn new(question: impl Into<String>, original_output: impl Into<String>) -> Self {
        CorrectionInput { history: None, question: question.into(), original_output: original_output.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionSample {
    /// Empty when the input had no history.
    pub history: String,
    pub question: String,
    pub original_output: String,
    pub verdict: CorrectionVerdict,
}

/// An item the teacher could not label. `raw_completion` is absent when the
/// backend call itself failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantineRecord {
    pub index: usize,
    pub question: String,
    pub original_output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_completion: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionOutcome {
    /// Correct and Wrong verdicts alike, in input order.
    pub samples: Vec<CorrectionSample>,
    pub quarantine: Vec<QuarantineRecord>,
}

/// One teacher call per input. Unparseable completions and backend failures
/// are quarantined; the batch always finishes.
pub async fn build_correction_dataset(
    inputs: &[CorrectionInput],
    teacher: &dyn ChatBackend,
    templates: &PromptTemplates,
    parallelism: usize,
) -> CorrectionOutcome {
    let labelled = fanout::ordered(inputs.iter(), parallelism, |input| async move {
        let request = match &input.history {
            Some(h) => build_teacher_request_with_history(templates, h, &input.question, &input.original_output),
            None => build_teacher_request(templates, &input.question, &input.original_output),
        }
        .map_err(|e| (None, e.to_string()))?;
        let raw = teacher.complete(&request).await.map_err(|e| (None, e.to_string()))?;
        parse_teacher_verdict(&raw).map_err(|e| (Some(raw), e.to_string()))
    })
    .await;

    let mut out = CorrectionOutcome::default();
    for (index, (input, result)) in inputs.iter().zip(labelled).enumerate() {
        match result {
            Ok(verdict) => out.samples.push(CorrectionSample {
                history: input.history.clone().unwrap_or_default(),
                question: input.question.clone(),
                original_output: input.original_output.clone(),
                verdict,
            }),
            Err((raw_completion, error)) => {
                tracing::warn!(index, %error, "quarantining correction item");
                out.quarantine.push(QuarantineRecord {
                    index,
                    question: input.question.clone(),
                    original_output: input.original_output.clone(),
                    raw_completion,
                    error,
                });
            }
        }
    }
    out
}

#[derive(Serialize)]
struct ReviewRow<'a> {
    index: usize,
    question: &'a str,
    original_output: &'a str,
    verdict: &'static str,
    violated_rule: Option<u8>,
    explanation: &'a str,
    corrected_output: &'a str,
    /// Left blank for the reviewer.
    reviewer_agrees: &'static str,
}

/// CSV sheet for manual review of teacher labels, one row per sample.
pub fn write_review_csv<W: Write>(samples: &[CorrectionSample], writer: W) -> Result<(), ForgeError> {
    let mut w = csv::Writer::from_writer(writer);
    for (index, s) in samples.iter().enumerate() {
        w.serialize(ReviewRow {
            index,
            question: &s.question,
            original_output: &s.original_output,
            verdict: match s.verdict.kind {
                VerdictKind::Correct => "correct",
                VerdictKind::Wrong => "wrong",
            },
            violated_rule: s.verdict.violated_rule,
            explanation: s.verdict.explanation.as_deref().unwrap_or(""),
            corrected_output: s.verdict.corrected_output.as_deref().unwrap_or(""),
            reviewer_agrees: "",
        })?;
    }
    w.flush()?;
    Ok(())
}
