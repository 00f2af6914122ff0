//! Shared domain model for multi-turn, multi-modal dialogue systems.
//!
//! - [`model`]: benchmark conversation records and modality scenarios
//! - [`dataset`]: JSONL persistence and label vocabularies
//! - [`chat`]: the chat request carrier
//! - [`protocol`]: the `<draw>` token grammar, verdict grammar and prompt builders
//! - [`store`]: content-addressed image storage

pub mod address;
pub mod chat;
pub mod dataset;
pub mod model;
pub mod protocol;
pub mod store;

pub use address::ContentAddress;
pub use chat::{ChatMessage, ChatRequest, Part, PartKind, Role};
pub use dataset::{load_dataset, save_dataset, DatasetError, Vocabulary, VocabularySet};
pub use model::{
    scenario_of, ConversationRecord, Language, Modality, ModalityScenario, TurnSpec, UserTurnInput, VqaItem,
};
pub use protocol::{
    parse_output, parse_teacher_verdict, render_output, CorrectionVerdict, ParsedAssistantOutput,
    PromptTemplates, ProtocolError, VerdictKind,
};
pub use store::{GeneratedImage, ImageStore};
