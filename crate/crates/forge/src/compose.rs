//! Benchmark compositions and meta prompts.

use std::fmt;

use midsmith_core::dataset::VocabularySet;
use midsmith_core::{Language, ModalityScenario, PromptTemplates};
use serde::{Deserialize, Serialize};

use crate::caption::CaptionedPair;
use crate::ForgeError;

pub const MAX_TURNS: usize = 6;

/// Per-turn modality scenarios of one conversation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Composition(pub Vec<ModalityScenario>);

impl Composition {
    pub fn turns(&self) -> &[ModalityScenario] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(s.code())?;
        }
        Ok(())
    }
}

/// Every composition of `turn_count` turns, lexicographic in scenario order
/// (`T->T` < `T->I` < `IT->T` < `IT->I`).
pub fn enumerate_compositions(turn_count: usize) -> Result<Vec<Composition>, ForgeError> {
    if !(1..=MAX_TURNS).contains(&turn_count) {
        return Err(ForgeError::TurnCountOutOfRange(turn_count));
    }
    let total = 4usize.pow(turn_count as u32);
    let out = (0..total)
        .map(|mut code| {
            // Most significant base-4 digit is the first turn.
            let mut turns = vec![ModalityScenario::TEXT_TO_TEXT; turn_count];
            for slot in turns.iter_mut().rev() {
                *slot = ModalityScenario::ALL[code % 4];
                code /= 4;
            }
            Composition(turns)
        })
        .collect();
    Ok(out)
}

/// An in-context example: an image caption and the drawing prompt written in
/// its style.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IclSample {
    pub caption: String,
    pub drawing_prompt: String,
}

impl IclSample {
    /// A re-captioned image serves as its own drawing prompt.
    pub fn from_captioned(pair: &CaptionedPair) -> Self {
        IclSample { caption: pair.caption.clone(), drawing_prompt: format!("<draw>{}", pair.caption) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaPromptSpec {
    pub composition: Composition,
    pub topic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edit_type: Option<String>,
    pub language: Language,
    #[serde(default)]
    pub icl_samples: Vec<IclSample>,
}

fn scenario_gloss(s: ModalityScenario) -> &'static str {
    match s.code() {
        "T->T" => "user sends text, assistant answers in text",
        "T->I" => "user sends text, assistant draws an image",
        "IT->T" => "user sends text and an image, assistant answers in text",
        _ => "user sends text and an image, assistant draws an image",
    }
}

fn language_directive(l: Language) -> &'static str {
    match l {
        Language::En => "Write the whole conversation in English.",
        Language::Cn => "Write the whole conversation in Chinese.",
    }
}

/// Fill the meta-prompt template for `spec`. Topic and edit type must belong
/// to `vocab`.
pub fn build_meta_prompt(
    spec: &MetaPromptSpec,
    templates: &PromptTemplates,
    vocab: &VocabularySet,
) -> Result<String, ForgeError> {
    vocab.check_topic(&spec.topic)?;
    if let Some(e) = &spec.edit_type {
        vocab.check_edit_type(e)?;
    }
    if spec.composition.is_empty() {
        return Err(ForgeError::InvalidArgument("composition has no turns".into()));
    }
    let turn_plan = spec
        .composition
        .turns()
        .iter()
        .enumerate()
        .map(|(i, s)| format!("Turn {}: {} ({})", i + 1, s.code(), scenario_gloss(*s)))
        .collect::<Vec<_>>()
        .join("\n");
    let edit_clause = match &spec.edit_type {
        Some(e) => format!("Edit type: later image turns should apply a {e} to the earlier image.\n"),
        None => String::new(),
    };
    let icl_examples = if spec.icl_samples.is_empty() {
        "(none)".to_owned()
    } else {
        spec.icl_samples
            .iter()
            .enumerate()
            .map(|(i, s)| format!("Example {}:\nCaption: {}\nDrawing prompt: {}", i + 1, s.caption, s.drawing_prompt))
            .collect::<Vec<_>>()
            .join("\n")
    };
    Ok(templates
        .meta_prompt
        .replace("{turn_count}", &spec.composition.len().to_string())
        .replace("{topic}", &spec.topic)
        .replace("{edit_clause}", &edit_clause)
        .replace("{language}", language_directive(spec.language))
        .replace("{turn_plan}", &turn_plan)
        .replace("{icl_examples}", &icl_examples))
}
