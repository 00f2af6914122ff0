//! HTTP clients for the wire protocol in [`crate::wire`].

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use midsmith_core::chat::PartKind;
use midsmith_core::{ChatRequest, ContentAddress, ImageStore, VqaItem};
use reqwest::StatusCode;
use serde::Serialize;
use tokio::sync::Semaphore;
use uuid::Uuid;

use crate::wire::{self, T2iRequestBody, VqaRequestBody, REQUEST_ID_HEADER};
use crate::{BackendConfig, BackendError, ChatBackend, GeneratedImage, T2IRequest, T2iBackend, VqaBackend};

/// Shared POST-with-retry machinery.
#[derive(Debug, Clone)]
pub struct HttpClient {
    client: reqwest::Client,
    base_url: String,
    auth_token_env: Option<String>,
    max_retries: u32,
    backoff: Duration,
    in_flight: Arc<Semaphore>,
}

impl HttpClient {
    pub fn new(cfg: &BackendConfig) -> Result<Self, BackendError> {
        cfg.validate()?;
        let base_url = cfg
            .base_url
            .clone()
            .ok_or_else(|| BackendError::Config("http backend requires base_url".into()))?;
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(HttpClient {
            client,
            base_url: base_url.trim_end_matches('/').to_owned(),
            auth_token_env: cfg.auth_token_env.clone(),
            max_retries: cfg.max_retries,
            backoff: Duration::from_millis(cfg.backoff_ms),
            in_flight: Arc::new(Semaphore::new(cfg.max_in_flight)),
        })
    }

    /// POST `body` to `{base_url}/{endpoint}`, retrying on connection errors,
    /// timeouts, 429 and 5xx. Returns the 200 response body.
    pub async fn post_json<B: Serialize + ?Sized>(&self, endpoint: &str, body: &B) -> Result<Vec<u8>, BackendError> {
        let _permit = self.in_flight.acquire().await.map_err(|_| BackendError::Unavailable("client closed".into()))?;
        let url = format!("{}/{}", self.base_url, endpoint);
        let request_id = Uuid::new_v4().to_string();
        let token = self.auth_token_env.as_deref().and_then(|name| std::env::var(name).ok());
        let mut attempt = 0;
        loop {
            let mut req = self.client.post(&url).header(REQUEST_ID_HEADER, &request_id).json(body);
            if let Some(t) = &token {
                req = req.bearer_auth(t);
            }
            let err = match req.send().await {
                Ok(resp) => {
                    let status = resp.status();
                    let bytes = resp.bytes().await.map_err(|e| BackendError::MalformedResponse(e.to_string()));
                    match status {
                        StatusCode::OK => return bytes.map(|b| b.to_vec()),
                        s if s == StatusCode::TOO_MANY_REQUESTS || s.is_server_error() => {
                            BackendError::Unavailable(format!("{url} returned {s}"))
                        }
                        StatusCode::UNAVAILABLE_FOR_LEGAL_REASONS => {
                            let msg = bytes.map(|b| String::from_utf8_lossy(&b).into_owned()).unwrap_or_default();
                            return Err(BackendError::SafetyRejection(msg));
                        }
                        s => {
                            let message = bytes.map(|b| String::from_utf8_lossy(&b).into_owned()).unwrap_or_default();
                            return Err(BackendError::Rejected { status: s.as_u16(), message });
                        }
                    }
                }
                Err(e) if e.is_timeout() => BackendError::Timeout,
                Err(e) if e.is_connect() || e.is_request() => BackendError::Unavailable(e.to_string()),
                Err(e) => return Err(BackendError::Unavailable(e.to_string())),
            };
            if attempt >= self.max_retries {
                return Err(err);
            }
            let delay = self.backoff.saturating_mul(1u32 << attempt.min(16));
            tracing::debug!(%url, attempt, ?delay, error = %err, "retrying backend call");
            tokio::time::sleep(delay).await;
            attempt += 1;
        }
    }
}

fn load_image(store: &ImageStore, addr: &ContentAddress) -> Result<Vec<u8>, BackendError> {
    store
        .get(addr)
        .map_err(|e| BackendError::Unavailable(format!("image store: {e}")))?
        .ok_or_else(|| BackendError::ImageNotFound(addr.to_string()))
}

pub struct HttpChat {
    client: HttpClient,
    store: ImageStore,
}

impl HttpChat {
    pub fn new(client: HttpClient, store: ImageStore) -> Self {
        HttpChat { client, store }
    }

    /// The request as sent on the wire: image addresses replaced by base64.
    pub fn wire_request(&self, request: &ChatRequest) -> Result<ChatRequest, BackendError> {
        let mut wire_req = request.clone();
        for part in wire_req.messages.iter_mut().flat_map(|m| m.parts.iter_mut()) {
            if part.kind == PartKind::Image {
                let addr = ContentAddress::parse(&part.value)
                    .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
                part.value = wire::encode_b64(&load_image(&self.store, &addr)?);
            }
        }
        Ok(wire_req)
    }
}

#[async_trait]
impl ChatBackend for HttpChat {
    async fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        request.validate().map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let body = self.wire_request(request)?;
        let resp = self.client.post_json("chat", &body).await?;
        wire::decode_chat_response(&resp)
    }
}

pub struct HttpT2i {
    client: HttpClient,
    store: ImageStore,
}

impl HttpT2i {
    pub fn new(client: HttpClient, store: ImageStore) -> Self {
        HttpT2i { client, store }
    }
}

#[async_trait]
impl T2iBackend for HttpT2i {
    async fn generate(&self, request: &T2IRequest) -> Result<GeneratedImage, BackendError> {
        request.validate()?;
        let body = T2iRequestBody {
            prompt: request.prompt.clone(),
            seed: request.seed,
            width: request.width,
            height: request.height,
        };
        let resp = self.client.post_json("t2i", &body).await?;
        let (bytes, mime) = wire::decode_t2i_response(&resp)?;
        let mut image = self.store.put(&bytes).map_err(|e| BackendError::Unavailable(format!("image store: {e}")))?;
        if let Some(m) = mime.filter(|m| !m.is_empty()) {
            image.mime = m;
        }
        Ok(image)
    }
}

pub struct HttpVqa {
    client: HttpClient,
    store: ImageStore,
}

impl HttpVqa {
    pub fn new(client: HttpClient, store: ImageStore) -> Self {
        HttpVqa { client, store }
    }
}

#[async_trait]
impl VqaBackend for HttpVqa {
    async fn probability(&self, image: &ContentAddress, item: &VqaItem) -> Result<f64, BackendError> {
        let body = VqaRequestBody {
            image_b64: wire::encode_b64(&load_image(&self.store, image)?),
            question: item.question.clone(),
            answer: item.expected_answer.clone(),
        };
        let resp = self.client.post_json("vqa", &body).await?;
        wire::decode_vqa_response(&resp)
    }
}
