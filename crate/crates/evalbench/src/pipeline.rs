use std::path::Path;

use midsmith_backends::VqaBackend;
use midsmith_core::ConversationRecord;
use midsmith_engine::Engine;

use crate::log::write_logs;
use crate::{coherence_score, ms_accuracy, run_inference, write_report, CoherenceReport, EvalError, InferenceRun, MsReport};

/// File name of the exported turn logs.
pub const LOGS_JSONL: &str = "logs.jsonl";

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub parallelism: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { parallelism: 8 }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub run: InferenceRun,
    pub ms: MsReport,
    pub coherence: Option<CoherenceReport>,
}

/// Score recorded logs and write the report into `out_dir`. Coherence is
/// scored when `vqa` is given.
pub async fn score_logs(
    run: InferenceRun,
    dataset: &[ConversationRecord],
    vqa: Option<&dyn VqaBackend>,
    options: EvalOptions,
    out_dir: impl AsRef<Path>,
) -> Result<EvalOutcome, EvalError> {
    let ms = ms_accuracy(&run.logs)?.with_failed_conversations(run.failures.len());
    let coherence = match vqa {
        Some(v) => Some(coherence_score(&run.logs, dataset, v, options.parallelism).await?),
        None => None,
    };
    write_report(&ms, coherence.as_ref(), out_dir)?;
    Ok(EvalOutcome { run, ms, coherence })
}

/// Run inference, export `logs.jsonl`, score and write the report, all into
/// `out_dir`.
pub async fn evaluate(
    dataset: &[ConversationRecord],
    engine: &Engine,
    vqa: Option<&dyn VqaBackend>,
    options: EvalOptions,
    out_dir: impl AsRef<Path>,
) -> Result<EvalOutcome, EvalError> {
    let out_dir = out_dir.as_ref();
    let run = run_inference(dataset, engine, options.parallelism).await;
    std::fs::create_dir_all(out_dir)?;
    write_logs(&run, out_dir.join(LOGS_JSONL))?;
    score_logs(run, dataset, vqa, options, out_dir).await
}
