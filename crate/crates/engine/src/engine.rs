use std::sync::Arc;

use midsmith_backends::{BackendError, ChatBackend, T2IRequest, T2iBackend};
use midsmith_core::protocol::{
    build_correction_request, build_inference_request, parse_output, parse_teacher_verdict, render_user_query,
};
use midsmith_core::{
    CorrectionVerdict, GeneratedImage, ImageStore, Modality, ParsedAssistantOutput, ProtocolError, UserTurnInput,
    VerdictKind,
};
use serde::{Deserialize, Serialize};

use crate::config::{BusyPolicy, EngineConfig};
use crate::session::{HistoryEntry, Session};
use crate::store::SessionStore;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("could not parse model output: {0}")]
    ParseFailure(ProtocolError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("session {0} is busy with another turn")]
    Busy(String),
    #[error("unknown session {0}")]
    NotFound(String),
    #[error("session {0} was evicted")]
    Evicted(String),
}

impl EngineError {
    /// Stable snake_case name; backend errors report their own kind.
    pub fn kind(&self) -> &'static str {
        match self {
            EngineError::Backend(e) => e.kind(),
            EngineError::ParseFailure(_) => "parse_failure",
            EngineError::InvalidInput(_) => "invalid_input",
            EngineError::Busy(_) => "busy",
            EngineError::NotFound(_) => "not_found",
            EngineError::Evicted(_) => "evicted",
        }
    }
}

/// Second-pass record kept for two-step turns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionTrace {
    /// Raw first reply.
    pub first_response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<CorrectionVerdict>,
    /// Why the first reply was kept despite the second pass, when it could
    /// not be used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssistantResult {
    pub modality: Modality,
    /// Reply text, or the drawing prompt for image turns.
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<GeneratedImage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correction_trace: Option<CorrectionTrace>,
}

pub struct Engine {
    config: EngineConfig,
    chat: Arc<dyn ChatBackend>,
    t2i: Arc<dyn T2iBackend>,
}

impl Engine {
    pub fn new(config: EngineConfig, chat: Arc<dyn ChatBackend>, t2i: Arc<dyn T2iBackend>) -> Self {
        Engine { config, chat, t2i }
    }

    /// Build backends from the config's chat and text-to-image sections.
    pub fn from_config(config: EngineConfig, store: &ImageStore) -> Result<Self, EngineError> {
        config.validate().map_err(EngineError::InvalidInput)?;
        let chat = config.chat.build_chat(store)?;
        let t2i = config.t2i.build_t2i(store)?;
        Ok(Self::new(config, chat, t2i))
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn new_session(&self, seed_override: Option<u64>) -> Session {
        Session::new(seed_override)
    }

    /// Run one turn in the configured mode.
    pub async fn step(&self, session: &mut Session, user: UserTurnInput) -> Result<AssistantResult, EngineError> {
        if self.config.two_step {
            self.step_two_stage(session, user).await
        } else {
            self.step_one(session, user).await
        }
    }

    /// Look up `id` in `store` and run one turn, honoring the busy policy.
    pub async fn step_in(
        &self,
        store: &SessionStore,
        id: &str,
        user: UserTurnInput,
    ) -> Result<AssistantResult, EngineError> {
        let handle = store.get(id)?;
        let mut session = match self.config.busy_policy {
            BusyPolicy::Reject => handle.try_lock().map_err(|_| EngineError::Busy(id.to_owned()))?,
            BusyPolicy::Wait => handle.lock().await,
        };
        self.step(&mut session, user).await
    }

    fn check_user(user: &UserTurnInput) -> Result<(), EngineError> {
        if user.text.trim().is_empty() {
            return Err(EngineError::InvalidInput("user text must not be empty".into()));
        }
        Ok(())
    }

    async fn first_reply(&self, session: &Session, user: &UserTurnInput) -> Result<(String, ParsedAssistantOutput), EngineError> {
        let history = session.chat_history(self.config.history_images_as_parts);
        let request = build_inference_request(&self.config.templates, &history, user).map_err(|e| match e {
            ProtocolError::EmptyInput(what) => EngineError::InvalidInput(format!("{what} must not be empty")),
            other => EngineError::InvalidInput(other.to_string()),
        })?;
        let raw = self.chat.complete(&request).await?;
        let parsed = parse_output(&raw).map_err(EngineError::ParseFailure)?;
        Ok((raw, parsed))
    }

    async fn render(&self, session: &Session, output: &ParsedAssistantOutput) -> Result<Option<GeneratedImage>, EngineError> {
        if output.modality != Modality::Image {
            return Ok(None);
        }
        let request = T2IRequest {
            prompt: output.text.clone(),
            seed: session.seed(),
            width: self.config.image_width,
            height: self.config.image_height,
        };
        Ok(Some(self.t2i.generate(&request).await?))
    }

    fn commit(
        session: &mut Session,
        user: UserTurnInput,
        output: ParsedAssistantOutput,
        image: Option<GeneratedImage>,
        correction_trace: Option<CorrectionTrace>,
    ) -> AssistantResult {
        let result = AssistantResult {
            modality: output.modality,
            text: output.text.clone(),
            image: image.clone(),
            correction_trace: correction_trace.clone(),
        };
        session.push(HistoryEntry { user, assistant: output, image, correction_trace });
        result
    }

    /// Single inference pass. History is only extended when the whole turn
    /// succeeds.
    pub async fn step_one(&self, session: &mut Session, user: UserTurnInput) -> Result<AssistantResult, EngineError> {
        Self::check_user(&user)?;
        let (_, parsed) = self.first_reply(session, &user).await?;
        let image = self.render(session, &parsed).await?;
        Ok(Self::commit(session, user, parsed, image, None))
    }

    /// First reply, then a self-correction pass over it. At most one image is
    /// generated, for the final output.
    pub async fn step_two_stage(&self, session: &mut Session, user: UserTurnInput) -> Result<AssistantResult, EngineError> {
        Self::check_user(&user)?;
        let (raw, first) = self.first_reply(session, &user).await?;
        let first_response = raw.trim().to_owned();
        let request = build_correction_request(&self.config.templates, &render_user_query(&user), &first_response)
            .map_err(|e| EngineError::InvalidInput(e.to_string()))?;
        let completion = self.chat.complete(&request).await?;

        let (final_output, trace) = match parse_teacher_verdict(&completion) {
            Ok(verdict) if verdict.kind == VerdictKind::Correct => {
                (first, CorrectionTrace { first_response, verdict: Some(verdict), fallback: None })
            }
            Ok(verdict) => {
                let corrected = verdict.corrected_output.as_deref().unwrap_or_default();
                match parse_output(corrected) {
                    Ok(p) => (p, CorrectionTrace { first_response, verdict: Some(verdict), fallback: None }),
                    Err(e) => {
                        let fallback = Some(format!("corrected output unusable: {e}"));
                        (first, CorrectionTrace { first_response, verdict: Some(verdict), fallback })
                    }
                }
            }
            Err(e) => {
                tracing::warn!(error = %e, "second-step verdict unparseable; keeping first reply");
                (first, CorrectionTrace { first_response, verdict: None, fallback: Some(e.to_string()) })
            }
        };
        let image = self.render(session, &final_output).await?;
        Ok(Self::commit(session, user, final_output, image, Some(trace)))
    }
}
