//! Builds digest-keyed chat scripts for [`midsmith_backends::mock::MockChat`]
//! by replaying the requests the engine will send.
//!
//! Only text history is modelled (`history_images_as_parts = false`).

use midsmith_backends::mock::MockScript;
use midsmith_core::chat::{ChatMessage, Role};
use midsmith_core::protocol::{
    build_correction_request, build_inference_request, parse_output, parse_teacher_verdict, render_output,
    render_user_query,
};
use midsmith_core::{ParsedAssistantOutput, PromptTemplates, UserTurnInput, VerdictKind};

/// Scripts one conversation turn by turn.
pub struct ConversationScript<'a> {
    templates: &'a PromptTemplates,
    script: &'a mut MockScript,
    history: Vec<ChatMessage>,
}

impl<'a> ConversationScript<'a> {
    pub fn new(templates: &'a PromptTemplates, script: &'a mut MockScript) -> Self {
        ConversationScript { templates, script, history: Vec::new() }
    }

    /// Script a one-step turn answering `reply`.
    ///
    /// # Panics
    /// If `reply` is not a valid assistant output or the user turn is empty.
    pub fn turn(&mut self, user: &UserTurnInput, reply: &str) -> ParsedAssistantOutput {
        let req = build_inference_request(self.templates, &self.history, user).expect("valid scripted turn");
        self.script.add_chat(&req, reply);
        let parsed = parse_output(reply).expect("scripted reply parses");
        self.push(user, &parsed);
        parsed
    }

    /// Script a two-step turn: `first` for the inference request, `second`
    /// for the correction request. Returns the final output the engine will
    /// commit.
    pub fn two_step_turn(&mut self, user: &UserTurnInput, first: &str, second: &str) -> ParsedAssistantOutput {
        let req = build_inference_request(self.templates, &self.history, user).expect("valid scripted turn");
        self.script.add_chat(&req, first);
        let first_parsed = parse_output(first).expect("scripted reply parses");
        let correction = build_correction_request(self.templates, &render_user_query(user), first.trim())
            .expect("valid correction request");
        self.script.add_chat(&correction, second);
        let final_output = match parse_teacher_verdict(second) {
            Ok(v) if v.kind == VerdictKind::Wrong => v
                .corrected_output
                .as_deref()
                .and_then(|c| parse_output(c).ok())
                .unwrap_or(first_parsed),
            _ => first_parsed,
        };
        self.push(user, &final_output);
        final_output
    }

    fn push(&mut self, user: &UserTurnInput, output: &ParsedAssistantOutput) {
        self.history.push(ChatMessage::from_user_turn(user));
        self.history.push(ChatMessage { role: Role::Assistant, parts: vec![midsmith_core::Part::text(render_output(output))] });
    }
}
