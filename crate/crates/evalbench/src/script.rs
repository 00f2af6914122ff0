//! Scripted systems under test for hermetic evaluation runs.
//!
//! The helpers replay the requests the engine will send for each benchmark
//! conversation and key the chosen completions by request digest, so a
//! [`MockScript`] built here answers the same way at any parallelism.

use midsmith_backends::mock::{synthetic_png, MockScript};
use midsmith_backends::T2IRequest;
use midsmith_core::protocol::{parse_output, render_output};
use midsmith_core::{ContentAddress, ConversationRecord, Modality, PromptTemplates, TurnSpec};
use midsmith_engine::scripting::ConversationScript;

/// The turn's reference reply, or a stand-in in the expected modality when
/// the dataset has none.
pub fn reference_reply(turn: &TurnSpec) -> String {
    if let Some(r) = turn.reference_response.as_deref().filter(|r| parse_output(r).is_ok()) {
        return r.trim().to_owned();
    }
    match turn.expected_modality {
        Modality::Image => format!("<draw>{}", turn.user.text),
        Modality::Text => format!("Here is my answer to: {}", turn.user.text),
    }
}

/// A reply in the wrong modality for `turn`.
pub fn wrong_reply(turn: &TurnSpec) -> String {
    match turn.expected_modality {
        Modality::Image => format!("I would describe it like this: {}", turn.user.text),
        Modality::Text => format!("<draw>{}", turn.user.text),
    }
}

/// Teacher-style second-step completion: `###Correct` when `first` is in the
/// right modality, otherwise a rule 1 verdict whose corrected solution is the
/// reference reply.
pub fn correction_completion(turn: &TurnSpec, first: &str) -> String {
    let right = parse_output(first).map(|p| p.modality == turn.expected_modality).unwrap_or(false);
    if right {
        "###Correct".to_owned()
    } else {
        let fix = parse_output(&reference_reply(turn)).expect("reference reply parses");
        format!(
            "###Wrong### The output violates rule 1. It answers in the wrong modality.\nCorrect Solution: {}",
            render_output(&fix)
        )
    }
}

/// Script a one-step system whose reply to turn `i` of each record is
/// `reply(record, i)`.
pub fn script_one_step(
    dataset: &[ConversationRecord],
    templates: &PromptTemplates,
    mut reply: impl FnMut(&ConversationRecord, usize) -> String,
) -> MockScript {
    let mut script = MockScript::default();
    for record in dataset {
        let mut conv = ConversationScript::new(templates, &mut script);
        for (i, turn) in record.turns.iter().enumerate() {
            conv.turn(&turn.user, &reply(record, i));
        }
    }
    script
}

/// Script a two-step system. `first(record, i)` is the initial reply; the
/// second step answers with [`correction_completion`].
pub fn script_two_step(
    dataset: &[ConversationRecord],
    templates: &PromptTemplates,
    mut first: impl FnMut(&ConversationRecord, usize) -> String,
) -> MockScript {
    let mut script = MockScript::default();
    for record in dataset {
        let mut conv = ConversationScript::new(templates, &mut script);
        for (i, turn) in record.turns.iter().enumerate() {
            let r1 = first(record, i);
            let r2 = correction_completion(turn, &r1);
            conv.two_step_turn(&turn.user, &r1, &r2);
        }
    }
    script
}

/// Address of the image the mock text-to-image backend renders for these
/// arguments.
pub fn mock_image_address(prompt: &str, seed: u64, width: u32, height: u32) -> ContentAddress {
    ContentAddress::of(&synthetic_png(&T2IRequest { prompt: prompt.to_owned(), seed, width, height }))
}
