//! Model backends: the chat model, the text-to-image generator and the VQA
//! scorer, each behind an async trait with an HTTP client and a deterministic
//! mock.

mod config;
mod error;
pub mod http;
pub mod mock;
pub mod wire;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

pub use config::{BackendConfig, BackendKind, Backends};
pub use error::BackendError;
pub use midsmith_core::chat::ChatRequest;
pub use midsmith_core::store::GeneratedImage;

use midsmith_core::{ContentAddress, VqaItem};

/// Largest accepted image side in pixels.
pub const MAX_IMAGE_SIDE: u32 = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct T2IRequest {
    pub prompt: String,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
}

impl T2IRequest {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.prompt.trim().is_empty() {
            return Err(BackendError::InvalidRequest("prompt must not be empty".into()));
        }
        for (name, v) in [("width", self.width), ("height", self.height)] {
            if v == 0 || v > MAX_IMAGE_SIDE {
                return Err(BackendError::InvalidRequest(format!("{name} must be in 1..={MAX_IMAGE_SIDE}, got {v}")));
            }
        }
        Ok(())
    }
}

#[async_trait]
pub trait ChatBackend: Send + Sync {
    /// Raw completion text for `request`.
    async fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;
}

#[async_trait]
pub trait T2iBackend: Send + Sync {
    /// Generate an image and place it in the backend's image store.
    async fn generate(&self, request: &T2IRequest) -> Result<GeneratedImage, BackendError>;
}

#[async_trait]
pub trait VqaBackend: Send + Sync {
    /// Probability in `[0, 1]` that the answer to `item.question` about
    /// `image` is `item.expected_answer`.
    async fn probability(&self, image: &ContentAddress, item: &VqaItem) -> Result<f64, BackendError>;
}

pub(crate) fn check_probability(p: f64) -> Result<f64, BackendError> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(BackendError::MalformedResponse(format!("probability {p} outside [0, 1]")))
    }
}
