use midsmith_backends::{BackendConfig, BackendError, T2IRequest};
use midsmith_core::PromptTemplates;
use serde::{Deserialize, Serialize};

/// What happens when a turn arrives for a session that is mid-turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusyPolicy {
    #[default]
    Reject,
    Wait,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Run the self-correction pass after every first reply.
    pub two_step: bool,
    pub image_width: u32,
    pub image_height: u32,
    pub templates: PromptTemplates,
    pub chat: BackendConfig,
    pub t2i: BackendConfig,
    /// Feed earlier generated images back to the chat model as image parts.
    /// Off by default: history carries the drawing prompt text only.
    pub history_images_as_parts: bool,
    pub busy_policy: BusyPolicy,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            two_step: false,
            image_width: 512,
            image_height: 512,
            templates: PromptTemplates::default(),
            chat: BackendConfig::mock(),
            t2i: BackendConfig::mock(),
            history_images_as_parts: false,
            busy_policy: BusyPolicy::Reject,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), String> {
        T2IRequest { prompt: "x".into(), seed: 0, width: self.image_width, height: self.image_height }
            .validate()
            .map_err(|e: BackendError| e.to_string())?;
        self.templates.validate().map_err(|e| e.to_string())?;
        self.chat.validate().map_err(|e| format!("chat backend: {e}"))?;
        self.t2i.validate().map_err(|e| format!("t2i backend: {e}"))?;
        Ok(())
    }
}
