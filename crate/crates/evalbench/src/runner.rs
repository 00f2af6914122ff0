use midsmith_core::{ConversationRecord, Modality};
use midsmith_engine::{Engine, Session};

use crate::log::{ConversationFailure, InferenceRun, TurnLog};

async fn run_conversation(engine: &Engine, record: &ConversationRecord) -> Result<Vec<TurnLog>, ConversationFailure> {
    // The seed comes from the conversation id so reruns draw the same images.
    let mut session = Session::with_id(record.id.clone(), None);
    let mut logs = Vec::with_capacity(record.turns.len());
    for (i, turn) in record.turns.iter().enumerate() {
        let round = i as u32 + 1;
        let result = engine.step(&mut session, turn.user.clone()).await.map_err(|e| ConversationFailure {
            conversation_id: record.id.clone(),
            round,
            kind: e.kind().to_owned(),
            error: e.to_string(),
        })?;
        let mut log = TurnLog::new(&record.id, round, turn.scenario(), result.modality);
        log.expected_modality = turn.expected_modality;
        log.correct = result.modality == turn.expected_modality;
        if result.modality == Modality::Image {
            log.drawing_prompt = Some(result.text);
            log.image_ref = result.image.map(|i| i.content_address);
        }
        logs.push(log);
    }
    Ok(logs)
}

/// Run every conversation of `dataset` through `engine` in a fresh session,
/// with at most `parallelism` conversations in flight. Logs come back in
/// dataset order; a failed conversation contributes no logs and one
/// failure entry.
pub async fn run_inference(dataset: &[ConversationRecord], engine: &Engine, parallelism: usize) -> InferenceRun {
    use futures::stream::{self, StreamExt};
    use futures::FutureExt;

    // Collecting boxed futures first keeps closures out of the stream type,
    // so the whole run stays `Send` for callers that spawn it.
    let conversations: Vec<_> = dataset.iter().map(|r| run_conversation(engine, r).boxed()).collect();
    let results: Vec<_> = stream::iter(conversations)
        .buffered(parallelism.max(1))
        .collect()
        .await;
    let mut run = InferenceRun::default();
    for r in results {
        match r {
            Ok(logs) => run.logs.extend(logs),
            Err(f) => {
                tracing::warn!(conversation = %f.conversation_id, round = f.round, error = %f.error, "conversation failed");
                run.failures.push(f);
            }
        }
    }
    run
}
