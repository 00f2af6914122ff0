//! The live dialogue loop.
//!
//! Each user turn goes to the chat backend with the full history; a reply
//! starting with `<draw>` is routed to the text-to-image backend using the
//! session's fixed seed, so subjects stay visually stable across turns. In
//! two-step mode the first reply is sent back with the correction prompt and
//! the model's own verdict decides the final output.

mod config;
mod engine;
mod session;
pub mod scripting;
mod store;

pub use config::{BusyPolicy, EngineConfig};
pub use engine::{AssistantResult, CorrectionTrace, Engine, EngineError};
pub use session::{derive_seed, HistoryEntry, Session, TranscriptEntry};
pub use store::{SessionHandle, SessionStore};
