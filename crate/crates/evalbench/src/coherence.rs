use std::collections::{BTreeMap, HashMap};

use futures::stream::{self, StreamExt};
use futures::FutureExt;
use midsmith_backends::VqaBackend;
use midsmith_core::{ConversationRecord, Modality, ModalityScenario};
use serde::{Deserialize, Serialize};

use crate::{EvalError, TurnLog};

/// Coherence of one expected-image turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub conversation_id: String,
    pub round: u32,
    pub scenario: ModalityScenario,
    pub topic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edit_type: Option<String>,
    /// Mean probability over the questions that were answered.
    pub score: f64,
    /// One entry per VQA item; `None` where the backend failed.
    pub probabilities: Vec<Option<f64>>,
    /// The system answered in text, so there was no image to judge and the
    /// score is 0.
    pub wrong_modality: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoherenceFlag {
    pub conversation_id: String,
    pub round: u32,
    /// VQA item index, absent for turn-level problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub n: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    /// Sorted by conversation id, then round.
    pub per_image: Vec<ImageScore>,
    /// Mean of `per_image` scores.
    pub overall: f64,
    pub by_topic: BTreeMap<String, Breakdown>,
    /// Turns of records without an edit type are grouped under `none`.
    pub by_edit_type: BTreeMap<String, Breakdown>,
    pub by_scenario: BTreeMap<String, Breakdown>,
    pub flags: Vec<CoherenceFlag>,
}

/// Sum in the given order, so the result only depends on the sorted input.
fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n as f64
}

fn breakdown<'a>(scores: &'a [ImageScore], key: impl Fn(&'a ImageScore) -> String) -> BTreeMap<String, Breakdown> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in scores {
        groups.entry(key(s)).or_default().push(s.score);
    }
    groups.into_iter().map(|(k, v)| (k, Breakdown { n: v.len(), mean: mean(v.into_iter()) })).collect()
}

/// Score every expected-image turn in `logs` against its VQA questions.
///
/// Turns where the system produced text score 0 and stay in the mean.
/// Failed VQA calls are skipped and flagged; a turn whose calls all fail is
/// left out and flagged.
pub async fn coherence_score(
    logs: &[TurnLog],
    dataset: &[ConversationRecord],
    vqa: &dyn VqaBackend,
    parallelism: usize,
) -> Result<CoherenceReport, EvalError> {
    let records: HashMap<&str, &ConversationRecord> = dataset.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut flags = Vec::new();

    let mut targets: Vec<(&TurnLog, &ConversationRecord)> = Vec::new();
    for log in logs.iter().filter(|l| l.expected_modality == Modality::Image) {
        let mismatch = |reason: &str| EvalError::LogMismatch {
            conversation_id: log.conversation_id.clone(),
            round: log.round,
            reason: reason.to_owned(),
        };
        let record = records.get(log.conversation_id.as_str()).ok_or_else(|| mismatch("unknown conversation"))?;
        let turn = (log.round as usize).checked_sub(1).and_then(|i| record.turns.get(i)).ok_or_else(|| mismatch("round out of range"))?;
        if turn.expected_modality != Modality::Image {
            return Err(mismatch("dataset turn does not expect an image"));
        }
        if turn.vqa_items.is_empty() {
            flags.push(CoherenceFlag {
                conversation_id: log.conversation_id.clone(),
                round: log.round,
                item: None,
                reason: "no VQA questions".into(),
            });
            continue;
        }
        targets.push((log, record));
    }
    targets.sort_by(|a, b| (&a.0.conversation_id, a.0.round).cmp(&(&b.0.conversation_id, b.0.round)));
    if let Some(w) = targets.windows(2).find(|w| (&w[0].0.conversation_id, w[0].0.round) == (&w[1].0.conversation_id, w[1].0.round)) {
        return Err(EvalError::LogMismatch {
            conversation_id: w[0].0.conversation_id.clone(),
            round: w[0].0.round,
            reason: "duplicate log".into(),
        });
    }

    // One job per (turn, question) over turns that did produce an image.
    let jobs: Vec<(usize, usize)> = targets
        .iter()
        .enumerate()
        .filter(|(_, (log, _))| log.predicted_modality == Modality::Image && log.image_ref.is_some())
        .flat_map(|(t, (log, record))| (0..record.turns[log.round as usize - 1].vqa_items.len()).map(move |q| (t, q)))
        .collect();
    let answers: Vec<_> = stream::iter(jobs.iter().copied())
        .map(|(t, q)| {
            let (log, record) = targets[t];
            let item = &record.turns[log.round as usize - 1].vqa_items[q];
            let image = log.image_ref.as_ref().expect("filtered to image turns");
            async move { vqa.probability(image, item).await }.boxed()
        })
        .buffered(parallelism.max(1))
        .collect()
        .await;
    let mut probs: HashMap<usize, Vec<Option<f64>>> = HashMap::new();
    for ((t, q), answer) in jobs.into_iter().zip(answers) {
        let slot = probs.entry(t).or_default();
        match answer {
            Ok(p) => slot.push(Some(p)),
            Err(e) => {
                let log = targets[t].0;
                flags.push(CoherenceFlag {
                    conversation_id: log.conversation_id.clone(),
                    round: log.round,
                    item: Some(q),
                    reason: e.to_string(),
                });
                slot.push(None);
            }
        }
    }

    let mut per_image = Vec::with_capacity(targets.len());
    for (t, (log, record)) in targets.iter().enumerate() {
        let (score, probabilities, wrong_modality) = match probs.remove(&t) {
            None => (0.0, Vec::new(), true),
            Some(p) => {
                let answered: Vec<f64> = p.iter().flatten().copied().collect();
                if answered.is_empty() {
                    flags.push(CoherenceFlag {
                        conversation_id: log.conversation_id.clone(),
                        round: log.round,
                        item: None,
                        reason: "every VQA question failed; turn excluded".into(),
                    });
                    continue;
                }
                (mean(answered.into_iter()), p, false)
            }
        };
        per_image.push(ImageScore {
            conversation_id: log.conversation_id.clone(),
            round: log.round,
            scenario: log.scenario,
            topic: record.topic.clone(),
            edit_type: record.edit_type.clone(),
            score,
            probabilities,
            wrong_modality,
        });
    }
    if per_image.is_empty() {
        return Err(EvalError::NothingToScore);
    }
    flags.sort_by(|a, b| (&a.conversation_id, a.round, a.item).cmp(&(&b.conversation_id, b.round, b.item)));

    Ok(CoherenceReport {
        overall: mean(per_image.iter().map(|s| s.score)),
        by_topic: breakdown(&per_image, |s| s.topic.clone()),
        by_edit_type: breakdown(&per_image, |s| s.edit_type.clone().unwrap_or_else(|| "none".into())),
        by_scenario: breakdown(&per_image, |s| s.scenario.code().to_owned()),
        per_image,
        flags,
    })
}
