//! Evaluation of multi-turn text/image dialogue systems.
//!
//! [`run_inference`] drives an [`midsmith_engine::Engine`] over a benchmark
//! and records one [`TurnLog`] per turn. Two metrics are computed from the
//! logs:
//!
//! * modality-switching accuracy per (round, scenario) cell, accumulated
//!   with exact rationals ([`ms_accuracy`]);
//! * generation coherence, the mean VQA probability of each generated
//!   image's questions ([`coherence_score`]).
//!
//! [`write_report`] renders both as deterministic JSON plus a text table.
//! Logs can be exported as JSONL and re-scored without rerunning inference.

mod coherence;
mod drift;
mod error;
mod log;
mod metrics;
mod pipeline;
mod report;
mod runner;
pub mod script;

pub use coherence::{coherence_score, Breakdown, CoherenceFlag, CoherenceReport, ImageScore};
pub use drift::{normalized_edit_distance, prompt_drift};
pub use error::EvalError;
pub use log::{parse_logs, read_logs, write_logs, ConversationFailure, InferenceRun, LogLine, TurnLog};
pub use metrics::{ms_accuracy, CellKey, CellStats, MsReport};
pub use pipeline::{evaluate, score_logs, EvalOptions, EvalOutcome, LOGS_JSONL};
pub use report::{fixed4, render_report_json, render_report_table, write_report, REPORT_JSON, REPORT_TXT};
pub use runner::run_inference;
