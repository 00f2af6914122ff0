//! Benchmark conversation records and the modality vocabulary they are built from.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::address::ContentAddress;

/// Output modality of a single assistant turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Image,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Image => "image",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Input/output shape of one turn: whether the user supplied an image, and
/// which modality the assistant must answer in.
///
/// Rendered as `T->T`, `T->I`, `IT->T` or `IT->I`. The derived ordering
/// matches that listing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModalityScenario {
    pub input_has_image: bool,
    pub output: Modality,
}

impl ModalityScenario {
    pub const TEXT_TO_TEXT: Self = Self::new(false, Modality::Text);
    pub const TEXT_TO_IMAGE: Self = Self::new(false, Modality::Image);
    pub const IMAGE_TEXT_TO_TEXT: Self = Self::new(true, Modality::Text);
    pub const IMAGE_TEXT_TO_IMAGE: Self = Self::new(true, Modality::Image);

    /// All four scenarios in canonical order.
    pub const ALL: [Self; 4] = [
        Self::TEXT_TO_TEXT,
        Self::TEXT_TO_IMAGE,
        Self::IMAGE_TEXT_TO_TEXT,
        Self::IMAGE_TEXT_TO_IMAGE,
    ];

    pub const fn new(input_has_image: bool, output: Modality) -> Self {
        ModalityScenario { input_has_image, output }
    }

    pub fn code(self) -> &'static str {
        match (self.input_has_image, self.output) {
            (false, Modality::Text) => "T->T",
            (false, Modality::Image) => "T->I",
            (true, Modality::Text) => "IT->T",
            (true, Modality::Image) => "IT->I",
        }
    }

    /// Position in [`ModalityScenario::ALL`].
    pub fn index(self) -> usize {
        (self.input_has_image as usize) * 2 + (self.output == Modality::Image) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown modality scenario {0:?}")]
pub struct UnknownScenario(pub String);

impl FromStr for ModalityScenario {
    type Err = UnknownScenario;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|sc| sc.code() == s)
            .ok_or_else(|| UnknownScenario(s.to_owned()))
    }
}

impl TryFrom<String> for ModalityScenario {
    type Error = UnknownScenario;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ModalityScenario> for String {
    fn from(s: ModalityScenario) -> String {
        s.code().to_owned()
    }
}

impl fmt::Display for ModalityScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Language {
    #[serde(rename = "en")]
    En,
    #[serde(rename = "cn")]
    Cn,
}

impl Language {
    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Cn => "cn",
        }
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "en" => Ok(Language::En),
            "cn" => Ok(Language::Cn),
            other => Err(format!("unknown language {other:?} (expected \"en\" or \"cn\")")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UserTurnInput {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<ContentAddress>,
}

impl UserTurnInput {
    pub fn text(text: impl Into<String>) -> Self {
        UserTurnInput { text: text.into(), image_ref: None }
    }

    pub fn with_image(text: impl Into<String>, image: ContentAddress) -> Self {
        UserTurnInput { text: text.into(), image_ref: Some(image) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VqaItem {
    pub question: String,
    pub expected_answer: String,
}

impl VqaItem {
    pub fn new(question: impl Into<String>, expected_answer: impl Into<String>) -> Self {
        VqaItem { question: question.into(), expected_answer: expected_answer.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnSpec {
    pub user: UserTurnInput,
    pub expected_modality: Modality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_response: Option<String>,
    #[serde(default)]
    pub vqa_items: Vec<VqaItem>,
}

impl TurnSpec {
    pub fn scenario(&self) -> ModalityScenario {
        scenario_of(self)
    }
}

/// One benchmark conversation.
///
/// Serialized key order is the declaration order below; optional keys are
/// omitted when absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationRecord {
    pub id: String,
    pub language: Language,
    pub topic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edit_type: Option<String>,
    pub turns: Vec<TurnSpec>,
}

/// A field-level invariant failure, reported with a dotted path such as
/// `turns[1].vqa_items[0].question`.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{field}: {reason}")]
pub struct FieldViolation {
    pub field: String,
    pub reason: String,
}

impl FieldViolation {
    fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        FieldViolation { field: field.into(), reason: reason.into() }
    }
}

impl ConversationRecord {
    /// Per-turn scenario tuple.
    pub fn composition(&self) -> Vec<ModalityScenario> {
        self.turns.iter().map(scenario_of).collect()
    }

    pub fn validate(&self) -> Result<(), FieldViolation> {
        if self.id.trim().is_empty() {
            return Err(FieldViolation::new("id", "must not be empty"));
        }
        if self.topic.trim().is_empty() {
            return Err(FieldViolation::new("topic", "must not be empty"));
        }
        if matches!(&self.edit_type, Some(e) if e.trim().is_empty()) {
            return Err(FieldViolation::new("edit_type", "must not be empty when present"));
        }
        if self.turns.is_empty() {
            return Err(FieldViolation::new("turns", "at least one turn required"));
        }
        for (t, turn) in self.turns.iter().enumerate() {
            if turn.user.text.trim().is_empty() {
                return Err(FieldViolation::new(format!("turns[{t}].user.text"), "must not be empty"));
            }
            if !turn.vqa_items.is_empty() && turn.expected_modality != Modality::Image {
                return Err(FieldViolation::new(
                    format!("turns[{t}].vqa_items"),
                    "only allowed when expected_modality is image",
                ));
            }
            for (q, item) in turn.vqa_items.iter().enumerate() {
                if !item.question.trim_end().ends_with('?') {
                    return Err(FieldViolation::new(
                        format!("turns[{t}].vqa_items[{q}].question"),
                        "must end with '?'",
                    ));
                }
                if item.expected_answer.trim().is_empty() {
                    return Err(FieldViolation::new(
                        format!("turns[{t}].vqa_items[{q}].expected_answer"),
                        "must not be empty",
                    ));
                }
            }
        }
        Ok(())
    }
}

pub fn scenario_of(turn: &TurnSpec) -> ModalityScenario {
    ModalityScenario::new(turn.user.image_ref.is_some(), turn.expected_modality)
}
