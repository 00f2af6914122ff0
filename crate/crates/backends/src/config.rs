use std::path::PathBuf;
use std::sync::Arc;

use midsmith_core::ImageStore;
use serde::{Deserialize, Serialize};

use crate::http::{HttpChat, HttpClient, HttpT2i, HttpVqa};
use crate::mock::{MockChat, MockScript, MockT2i, MockVqa};
use crate::{BackendError, ChatBackend, T2iBackend, VqaBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

/// How to reach one model backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub base_url: Option<String>,
    /// Name of an environment variable holding a bearer token.
    pub auth_token_env: Option<String>,
    pub timeout_ms: u64,
    pub max_retries: u32,
    /// Concurrent requests allowed per client.
    pub max_in_flight: usize,
    /// Initial retry delay; doubles after each failed attempt.
    pub backoff_ms: u64,
    /// Mock script file (see [`MockScript`]); only read when `kind` is mock.
    pub script: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            base_url: None,
            auth_token_env: None,
            timeout_ms: 30_000,
            max_retries: 2,
            max_in_flight: 8,
            backoff_ms: 100,
            script: None,
        }
    }
}

impl BackendConfig {
    pub fn mock() -> Self {
        Self::default()
    }

    pub fn http(base_url: impl Into<String>) -> Self {
        BackendConfig { kind: BackendKind::Http, base_url: Some(base_url.into()), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.timeout_ms == 0 {
            return Err(BackendError::Config("timeout_ms must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(BackendError::Config("max_in_flight must be positive".into()));
        }
        if self.kind == BackendKind::Http {
            let url = self
                .base_url
                .as_deref()
                .ok_or_else(|| BackendError::Config("http backend requires base_url".into()))?;
            reqwest::Url::parse(url).map_err(|e| BackendError::Config(format!("base_url {url:?}: {e}")))?;
        }
        Ok(())
    }

    fn script(&self) -> Result<MockScript, BackendError> {
        match &self.script {
            Some(p) => MockScript::load(p),
            None => Ok(MockScript::default()),
        }
    }

    pub fn build_chat(&self, store: &ImageStore) -> Result<Arc<dyn ChatBackend>, BackendError> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Mock => Arc::new(self.script()?.chat_backend()) as Arc<dyn ChatBackend>,
            BackendKind::Http => Arc::new(HttpChat::new(HttpClient::new(self)?, store.clone())),
        })
    }

    pub fn build_t2i(&self, store: &ImageStore) -> Result<Arc<dyn T2iBackend>, BackendError> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Mock => {
                let script = self.script()?;
                Arc::new(MockT2i::new(store.clone()).with_blocked_terms(script.t2i_blocked)) as Arc<dyn T2iBackend>
            }
            BackendKind::Http => Arc::new(HttpT2i::new(HttpClient::new(self)?, store.clone())),
        })
    }

    pub fn build_vqa(&self, store: &ImageStore) -> Result<Arc<dyn VqaBackend>, BackendError> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Mock => Arc::new(self.script()?.vqa_backend().with_store(store.clone())) as Arc<dyn VqaBackend>,
            BackendKind::Http => Arc::new(HttpVqa::new(HttpClient::new(self)?, store.clone())),
        })
    }
}

/// A chat, text-to-image and VQA backend sharing one image store.
#[derive(Clone)]
pub struct Backends {
    pub chat: Arc<dyn ChatBackend>,
    pub t2i: Arc<dyn T2iBackend>,
    pub vqa: Arc<dyn VqaBackend>,
    pub store: ImageStore,
}

impl Backends {
    pub fn from_configs(
        chat: &BackendConfig,
        t2i: &BackendConfig,
        vqa: &BackendConfig,
        store: ImageStore,
    ) -> Result<Self, BackendError> {
        Ok(Backends {
            chat: chat.build_chat(&store)?,
            t2i: t2i.build_t2i(&store)?,
            vqa: vqa.build_vqa(&store)?,
            store,
        })
    }

    /// Mocks with empty scripts over a fresh in-memory store.
    pub fn empty_mocks() -> Self {
        let store = ImageStore::in_memory();
        Backends {
            chat: Arc::new(MockChat::new()),
            t2i: Arc::new(MockT2i::new(store.clone())),
            vqa: Arc::new(MockVqa::new()),
            store,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn http_requires_base_url() {
        let cfg = BackendConfig { kind: BackendKind::Http, ..BackendConfig::default() };
        assert!(matches!(cfg.validate(), Err(BackendError::Config(_))));
        assert!(BackendConfig::http("http://127.0.0.1:9").validate().is_ok());
        assert!(BackendConfig::http("not a url").validate().is_err());
    }

    #[test]
    fn defaults_from_partial_json() {
        let cfg: BackendConfig = serde_json::from_str(r#"{"kind":"http","base_url":"http://x"}"#).unwrap();
        assert_eq!(cfg.max_retries, 2);
        assert_eq!(cfg.timeout_ms, 30_000);
    }
}
