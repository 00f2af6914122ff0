//! HTTP service and command-line front end.
//!
//! The server keeps live chat sessions in memory, serves generated images by
//! content address and runs evaluation jobs one at a time on a background
//! worker. The `midsmith` binary wraps the same pieces plus the offline data
//! pipelines.

pub mod api;
pub mod cli;
mod config;
mod jobs;
mod server;

pub use config::{AppConfig, ConfigError, ENV_PREFIX};
pub use jobs::{JobQueue, JobRunner};
pub use server::{router, serve, serve_on, ApiError, AppState, ServeError};

/// Crate version reported by the health probe.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
