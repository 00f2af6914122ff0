//! Evaluation jobs: one background worker draining a FIFO queue.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::Context;
use chrono::Utc;
use midsmith_core::{load_dataset, ImageStore};
use midsmith_engine::Engine;
use midsmith_evalbench::{evaluate, read_logs, score_logs, EvalOptions, EvalOutcome, REPORT_JSON};
use tokio::sync::mpsc;

use crate::api::{EvalJob, EvalRequest, JobState};
use crate::config::AppConfig;

/// Everything an evaluation needs besides the request itself.
#[derive(Clone)]
pub struct JobRunner {
    config: Arc<AppConfig>,
    store: ImageStore,
}

impl JobRunner {
    pub fn new(config: Arc<AppConfig>, store: ImageStore) -> Self {
        JobRunner { config, store }
    }

    /// Run (or, with `score_only`, just score) an evaluation and write
    /// `logs.jsonl`, `report.json` and `report.txt` into `out_dir`.
    ///
    /// An `images/` directory next to the dataset is imported into the
    /// image store first so user-turn image references resolve.
    pub async fn run(&self, req: &EvalRequest, score_only: Option<&Path>, out_dir: &Path) -> anyhow::Result<EvalOutcome> {
        let path = self.config.resolve_dataset(&req.dataset_path);
        let dataset = load_dataset(&path).with_context(|| format!("loading dataset {}", path.display()))?;
        if let Some(images) = path.parent().map(|p| p.join("images")).filter(|d| d.is_dir()) {
            let n = self.store.import_dir(&images).with_context(|| format!("importing {}", images.display()))?;
            tracing::debug!(count = n, dir = %images.display(), "imported dataset images");
        }
        let vqa = if req.coherence { Some(self.config.vqa.build_vqa(&self.store)?) } else { None };
        let options = EvalOptions { parallelism: self.config.parallelism };
        let outcome = match score_only {
            Some(logs) => {
                let run = read_logs(logs).with_context(|| format!("reading {}", logs.display()))?;
                score_logs(run, &dataset, vqa.as_deref(), options, out_dir).await?
            }
            None => {
                let mut engine_config = self.config.engine.clone();
                engine_config.two_step = req.two_step;
                let engine = Engine::from_config(engine_config, &self.store)?;
                evaluate(&dataset, &engine, vqa.as_deref(), options, out_dir).await?
            }
        };
        Ok(outcome)
    }
}

type JobTable = Arc<Mutex<HashMap<String, EvalJob>>>;

/// Submitted jobs and the channel feeding the worker.
#[derive(Clone)]
pub struct JobQueue {
    jobs: JobTable,
    tx: mpsc::UnboundedSender<String>,
}

impl JobQueue {
    /// Spawn the worker on the current tokio runtime.
    pub fn start(runner: JobRunner) -> Self {
        let jobs: JobTable = Arc::default();
        let (tx, rx) = mpsc::unbounded_channel();
        tokio::spawn(worker(runner, jobs.clone(), rx));
        JobQueue { jobs, tx }
    }

    pub fn submit(&self, req: EvalRequest) -> String {
        let id = uuid::Uuid::new_v4().to_string();
        let job = EvalJob {
            id: id.clone(),
            state: JobState::Queued,
            dataset_path: req.dataset_path,
            coherence: req.coherence,
            two_step: req.two_step,
            started_at: None,
            finished_at: None,
            report_path: None,
            error: None,
            report: None,
        };
        self.jobs.lock().expect("job table lock").insert(id.clone(), job);
        if self.tx.send(id.clone()).is_err() {
            self.update(&id, |j| {
                j.state = JobState::Failed;
                j.error = Some("evaluation worker stopped".into());
            });
        }
        id
    }

    /// Current job state; finished jobs carry the parsed report.
    pub fn get(&self, id: &str) -> Option<EvalJob> {
        let mut job = self.jobs.lock().expect("job table lock").get(id).cloned()?;
        if job.state == JobState::Done {
            job.report = job
                .report_path
                .as_ref()
                .and_then(|p| std::fs::read(p).ok())
                .and_then(|b| serde_json::from_slice(&b).ok());
        }
        Some(job)
    }

    /// Poll until the job is done or failed.
    pub async fn wait(&self, id: &str) -> Option<EvalJob> {
        loop {
            let job = self.get(id)?;
            if matches!(job.state, JobState::Done | JobState::Failed) {
                return Some(job);
            }
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut EvalJob)) {
        update(&self.jobs, id, f)
    }
}

fn update(jobs: &JobTable, id: &str, f: impl FnOnce(&mut EvalJob)) {
    if let Some(j) = jobs.lock().expect("job table lock").get_mut(id) {
        f(j)
    }
}

async fn worker(runner: JobRunner, jobs: JobTable, mut rx: mpsc::UnboundedReceiver<String>) {
    while let Some(id) = rx.recv().await {
        let Some(req) = jobs.lock().expect("job table lock").get(&id).map(|j| EvalRequest {
            dataset_path: j.dataset_path.clone(),
            coherence: j.coherence,
            two_step: j.two_step,
        }) else {
            continue;
        };
        update(&jobs, &id, |j| {
            j.state = JobState::Running;
            j.started_at = Some(Utc::now());
        });
        let out_dir: PathBuf = runner.config.report_dir.join(&id);
        tracing::info!(job = %id, dataset = %req.dataset_path.display(), "eval job started");
        let result = runner.run(&req, None, &out_dir).await;
        update(&jobs, &id, |j| {
            j.finished_at = Some(Utc::now());
            match result {
                Ok(_) => {
                    j.state = JobState::Done;
                    j.report_path = Some(out_dir.join(REPORT_JSON));
                }
                Err(e) => {
                    tracing::warn!(job = %j.id, error = %e, "eval job failed");
                    j.state = JobState::Failed;
                    j.error = Some(format!("{e:#}"));
                }
            }
        });
    }
}
