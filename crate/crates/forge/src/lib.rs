//! Offline pipelines that produce benchmark and training data.
//!
//! * [`compose`]: enumerate per-turn modality compositions and assemble the
//!   meta prompts that ask a large model to write benchmark conversations.
//! * [`caption`]: re-caption an image corpus so drawing prompts follow the
//!   captioner's distribution, and sample in-context examples from it.
//! * [`mix`]: instruction samples and the pseudo multi-turn mixer.
//! * [`intent`]: drop conversations whose instructions do not imply the
//!   labelled output modality.
//! * [`correction`]: teacher-labelled correction data and its review export.
//! * [`export`]: training-mix JSONL with a per-source manifest.
//!
//! Batch pipelines never abort on a single bad item. Failures are collected
//! next to the results, in input order.

pub mod caption;
pub mod compose;
pub mod correction;
mod error;
pub mod export;
mod fanout;
pub mod intent;
pub mod mix;

pub use caption::{recaption_corpus, select_icl_samples, CaptionedPair, RecaptionOutcome};
pub use compose::{build_meta_prompt, enumerate_compositions, Composition, IclSample, MetaPromptSpec};
pub use correction::{build_correction_dataset, CorrectionInput, CorrectionOutcome, CorrectionSample, QuarantineRecord};
pub use error::{ForgeError, ItemFailure};
pub use export::{export_training_mix, MixManifest, TrainingParts};
pub use intent::{filter_intent_mismatch, IntentFilterOutcome, Rejection, TurnMismatch, Undecided};
pub use mix::{dp_seed_examples, mix_pseudo_multiturn, InstructionSample, InstructionTurn, SampleSource};

/// Parallelism used when a caller does not choose one.
pub const DEFAULT_PARALLELISM: usize = 8;
