//! Deterministic in-process backends.
//!
//! Every mock answer is a pure function of the request content, never of call
//! order, so batches can be replayed in any order or concurrently.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use midsmith_core::address::{sha256, ContentAddress};
use midsmith_core::{ChatRequest, ImageStore, VqaItem};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{check_probability, BackendError, ChatBackend, GeneratedImage, T2IRequest, T2iBackend, VqaBackend};

/// Largest side the mock generator renders; larger requests are downscaled.
pub const MOCK_MAX_SIDE: u32 = 64;

/// Chat mock answering from a table keyed by [`ChatRequest::digest`].
#[derive(Debug, Clone, Default)]
pub struct MockChat {
    script: HashMap<String, String>,
}

impl MockChat {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_digests(script: impl IntoIterator<Item = (String, String)>) -> Self {
        MockChat { script: script.into_iter().collect() }
    }

    pub fn with(mut self, request: &ChatRequest, completion: impl Into<String>) -> Self {
        self.insert(request, completion);
        self
    }

    pub fn insert(&mut self, request: &ChatRequest, completion: impl Into<String>) {
        self.script.insert(request.digest(), completion.into());
    }

    pub fn len(&self) -> usize {
        self.script.len()
    }

    pub fn is_empty(&self) -> bool {
        self.script.is_empty()
    }
}

#[async_trait]
impl ChatBackend for MockChat {
    async fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        request.validate().map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let digest = request.digest();
        self.script
            .get(&digest)
            .cloned()
            .ok_or(BackendError::ScriptMiss(format!("chat request {digest}")))
    }
}

/// Text-to-image mock rendering a noise image seeded by `(prompt, seed)`.
#[derive(Debug, Clone)]
pub struct MockT2i {
    store: ImageStore,
    blocked: Vec<String>,
}

impl MockT2i {
    pub fn new(store: ImageStore) -> Self {
        MockT2i { store, blocked: Vec::new() }
    }

    /// Prompts containing any of `terms` (case-insensitive) are refused.
    pub fn with_blocked_terms(mut self, terms: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.blocked = terms.into_iter().map(|t| t.into().to_lowercase()).collect();
        self
    }

    pub fn store(&self) -> &ImageStore {
        &self.store
    }
}

/// PNG bytes the mock produces for `request`.
pub fn synthetic_png(request: &T2IRequest) -> Vec<u8> {
    let w = request.width.clamp(1, MOCK_MAX_SIDE);
    let h = request.height.clamp(1, MOCK_MAX_SIDE);
    let mut rng = ChaCha8Rng::from_seed(seed_bytes(request.prompt.as_bytes(), request.seed));
    let mut base = [0u8; 3];
    rng.fill_bytes(&mut base);
    let mut data = vec![0u8; (w * h * 3) as usize];
    for y in 0..h {
        for x in 0..w {
            let i = ((y * w + x) * 3) as usize;
            let noise = (rng.next_u32() & 0x1f) as u8;
            data[i] = base[0].wrapping_add((x * 4) as u8).wrapping_add(noise);
            data[i + 1] = base[1].wrapping_add((y * 4) as u8).wrapping_add(noise);
            data[i + 2] = base[2].wrapping_add(((x + y) * 2) as u8);
        }
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w, h);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("png header to memory");
        writer.write_image_data(&data).expect("png data to memory");
    }
    out
}

#[async_trait]
impl T2iBackend for MockT2i {
    async fn generate(&self, request: &T2IRequest) -> Result<GeneratedImage, BackendError> {
        request.validate()?;
        let lower = request.prompt.to_lowercase();
        if let Some(term) = self.blocked.iter().find(|t| lower.contains(t.as_str())) {
            return Err(BackendError::SafetyRejection(format!("prompt contains {term:?}")));
        }
        let bytes = synthetic_png(request);
        self.store.put(&bytes).map_err(|e| BackendError::Unavailable(format!("image store: {e}")))
    }
}

/// VQA mock answering from a `(image, question) -> probability` table.
#[derive(Debug, Clone, Default)]
pub struct MockVqa {
    table: HashMap<(ContentAddress, String), f64>,
    default: Option<f64>,
    store: Option<ImageStore>,
}

impl MockVqa {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, image: &ContentAddress, question: impl Into<String>, prob: f64) -> Self {
        self.insert(image, question, prob);
        self
    }

    /// # Panics
    /// If `prob` is not in `[0, 1]`.
    pub fn insert(&mut self, image: &ContentAddress, question: impl Into<String>, prob: f64) {
        assert!(check_probability(prob).is_ok(), "fixture probability {prob} outside [0, 1]");
        self.table.insert((image.clone(), question.into()), prob);
    }

    /// Probability returned for unscripted pairs instead of `ScriptMiss`.
    pub fn with_default(mut self, prob: f64) -> Self {
        assert!(check_probability(prob).is_ok(), "default probability {prob} outside [0, 1]");
        self.default = Some(prob);
        self
    }

    /// Images not present in `store` yield `ImageNotFound`.
    pub fn with_store(mut self, store: ImageStore) -> Self {
        self.store = Some(store);
        self
    }
}

#[async_trait]
impl VqaBackend for MockVqa {
    async fn probability(&self, image: &ContentAddress, item: &VqaItem) -> Result<f64, BackendError> {
        if let Some(store) = &self.store {
            if !store.contains(image) {
                return Err(BackendError::ImageNotFound(image.to_string()));
            }
        }
        self.table
            .get(&(image.clone(), item.question.clone()))
            .copied()
            .or(self.default)
            .ok_or_else(|| BackendError::ScriptMiss(format!("vqa ({image}, {:?})", item.question)))
    }
}

/// Wraps a chat backend and records every request it sees.
#[derive(Clone)]
pub struct RecordingChat<B> {
    inner: B,
    seen: Arc<Mutex<Vec<ChatRequest>>>,
}

impl<B> RecordingChat<B> {
    pub fn new(inner: B) -> Self {
        RecordingChat { inner, seen: Arc::default() }
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.seen.lock().expect("recorder lock").clone()
    }
}

#[async_trait]
impl<B: ChatBackend> ChatBackend for RecordingChat<B> {
    async fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        self.seen.lock().expect("recorder lock").push(request.clone());
        self.inner.complete(request).await
    }
}

/// Wraps a text-to-image backend and records every request it sees.
#[derive(Clone)]
pub struct RecordingT2i<B> {
    inner: B,
    seen: Arc<Mutex<Vec<T2IRequest>>>,
}

impl<B> RecordingT2i<B> {
    pub fn new(inner: B) -> Self {
        RecordingT2i { inner, seen: Arc::default() }
    }

    pub fn requests(&self) -> Vec<T2IRequest> {
        self.seen.lock().expect("recorder lock").clone()
    }
}

#[async_trait]
impl<B: T2iBackend> T2iBackend for RecordingT2i<B> {
    async fn generate(&self, request: &T2IRequest) -> Result<GeneratedImage, BackendError> {
        self.seen.lock().expect("recorder lock").push(request.clone());
        self.inner.generate(request).await
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaScriptEntry {
    pub image: ContentAddress,
    pub question: String,
    pub prob: f64,
}

/// Script file for the mock backends:
///
/// ```json
/// {"chat": {"<request digest>": "<completion>"},
///  "vqa": [{"image": "<address>", "question": "...", "prob": 0.9}],
///  "vqa_default": null,
///  "t2i_blocked": ["term"]}
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockScript {
    pub chat: BTreeMap<String, String>,
    pub vqa: Vec<VqaScriptEntry>,
    pub vqa_default: Option<f64>,
    pub t2i_blocked: Vec<String>,
}

impl MockScript {
    pub fn parse(text: &str) -> Result<Self, BackendError> {
        let script: MockScript =
            serde_json::from_str(text).map_err(|e| BackendError::Config(format!("mock script: {e}")))?;
        for e in &script.vqa {
            check_probability(e.prob).map_err(|_| BackendError::Config(format!("vqa prob {} outside [0, 1]", e.prob)))?;
        }
        if let Some(p) = script.vqa_default {
            check_probability(p).map_err(|_| BackendError::Config(format!("vqa_default {p} outside [0, 1]")))?;
        }
        Ok(script)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn add_chat(&mut self, request: &ChatRequest, completion: impl Into<String>) {
        self.chat.insert(request.digest(), completion.into());
    }

    pub fn chat_backend(&self) -> MockChat {
        MockChat::from_digests(self.chat.clone())
    }

    pub fn vqa_backend(&self) -> MockVqa {
        let mut m = MockVqa::new();
        for e in &self.vqa {
            m.insert(&e.image, e.question.clone(), e.prob);
        }
        if let Some(p) = self.vqa_default {
            m = m.with_default(p);
        }
        m
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serializes")
    }
}

/// 32-byte RNG seed from a prompt and a numeric seed.
fn seed_bytes(prompt: &[u8], seed: u64) -> [u8; 32] {
    let mut buf = prompt.to_vec();
    buf.push(0);
    buf.extend_from_slice(&seed.to_le_bytes());
    sha256(&buf)
}
