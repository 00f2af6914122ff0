use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use midsmith_backends::mock::{MockChat, MockScript, MockT2i, RecordingChat, RecordingT2i};
use midsmith_backends::{BackendError, ChatBackend, ChatRequest, T2iBackend};
use midsmith_core::{ImageStore, Modality, PromptTemplates, UserTurnInput, VerdictKind};
use midsmith_engine::scripting::ConversationScript;
use midsmith_engine::{BusyPolicy, Engine, EngineConfig, EngineError, Session, SessionStore};
use proptest::prelude::*;

const SQUIRREL: &str = "<draw>A lively squirrel jumping in the forest, the background is dense forest, the lens is close-up, the style is cartoon style.";
const ROCKET_ESSAY: &str = "A rocket is a large, powerful, and complex machine that is used to transport people and goods into space. It is usually made of steel and aluminum and is equipped with engines, fuel tanks, guidance systems, and other equipment. The picture shows a large rocket with a long tail, flying high in the sky.";
const ROCKET_FIX: &str = "###Wrong### The output violates rule 3. The assistant's description misses the main point of the asking for a visual image of a rocket.\nCorrect Solution: <draw>A rocket propelled upward by burning flames is moving through space, the Milky Way and stars in the background, the shot is panoramic, and the style is cartoonish.";

struct Rig {
    engine: Engine,
    chat: RecordingChat<MockChat>,
    t2i: RecordingT2i<MockT2i>,
}

fn rig(script: &MockScript, two_step: bool) -> Rig {
    let chat = RecordingChat::new(script.chat_backend());
    let t2i = RecordingT2i::new(MockT2i::new(ImageStore::in_memory()));
    let config = EngineConfig { two_step, ..EngineConfig::default() };
    let engine = Engine::new(config, Arc::new(chat.clone()), Arc::new(t2i.clone()));
    Rig { engine, chat, t2i }
}

fn user(text: &str) -> UserTurnInput {
    UserTurnInput::text(text)
}

#[tokio::test]
async fn draw_reply_generates_one_image_with_session_seed() {
    let t = PromptTemplates::default();
    let mut script = MockScript::default();
    ConversationScript::new(&t, &mut script).turn(&user("I want to see a squirrel in the forest."), SQUIRREL);
    let rig = rig(&script, false);
    let mut s = Session::new(Some(99));
    let r = rig.engine.step(&mut s, user("I want to see a squirrel in the forest.")).await.unwrap();
    assert_eq!(r.modality, Modality::Image);
    assert!(r.text.starts_with("A lively squirrel jumping"));
    let reqs = rig.t2i.requests();
    assert_eq!(reqs.len(), 1);
    assert_eq!(reqs[0].prompt, r.text);
    assert_eq!(reqs[0].seed, 99);
    assert_eq!((reqs[0].width, reqs[0].height), (512, 512));
    assert_eq!(r.image.unwrap().content_address, s.history()[0].image.as_ref().unwrap().content_address);
}

#[tokio::test]
async fn text_reply_never_calls_t2i() {
    let t = PromptTemplates::default();
    let mut script = MockScript::default();
    ConversationScript::new(&t, &mut script).turn(&user("What is hanging from the pole?"), "A green street sign.");
    let rig = rig(&script, false);
    let mut s = Session::new(None);
    let r = rig.engine.step(&mut s, user("What is hanging from the pole?")).await.unwrap();
    assert_eq!(r.modality, Modality::Text);
    assert!(r.image.is_none());
    assert!(rig.t2i.requests().is_empty());
}

#[tokio::test]
async fn image_turns_share_the_seed_and_history_feeds_back() {
    let t = PromptTemplates::default();
    let mut script = MockScript::default();
    let turns = [
        ("I love fast trains. Can you draw me a picture?", "<draw>A black steam train gallops along the tracks. The style is realistic."),
        ("Draw the train in cartoon style.", "<draw>A black steam train gallops along the railway tracks. The style is cartoon style."),
        ("Why are steam trains black?", "Soot and heat-resistant paint."),
    ];
    let mut cs = ConversationScript::new(&t, &mut script);
    for (u, a) in turns {
        cs.turn(&user(u), a);
    }
    let rig = rig(&script, false);
    let mut s = Session::with_id("conv-trains", None);
    for (u, _) in turns {
        rig.engine.step(&mut s, user(u)).await.unwrap();
    }
    let seeds: Vec<u64> = rig.t2i.requests().iter().map(|r| r.seed).collect();
    assert_eq!(seeds, vec![s.seed(), s.seed()]);
    let last = rig.chat.requests().pop().unwrap();
    assert_eq!(last.messages.len(), 5);
    assert_eq!(last.messages[1].text(), turns[0].1);
    assert_eq!(s.snapshot().len(), 3);
}

#[tokio::test]
async fn failed_turn_leaves_history_untouched() {
    let t = PromptTemplates::default();
    let mut script = MockScript::default();
    let mut cs = ConversationScript::new(&t, &mut script);
    cs.turn(&user("hi"), "hello");
    let rig = rig(&script, false);
    let mut s = Session::new(None);
    rig.engine.step(&mut s, user("hi")).await.unwrap();
    let before = s.clone();
    let err = rig.engine.step(&mut s, user("unscripted")).await.unwrap_err();
    assert!(matches!(err, EngineError::Backend(BackendError::ScriptMiss(_))));
    assert_eq!(s, before);

    let err = rig.engine.step(&mut s, user("   ")).await.unwrap_err();
    assert!(matches!(err, EngineError::InvalidInput(_)));
    assert_eq!(s, before);
}

#[tokio::test]
async fn empty_completion_is_parse_failure() {
    let t = PromptTemplates::default();
    let mut script = MockScript::default();
    let req = midsmith_core::protocol::build_inference_request(&t, &[], &user("draw")).unwrap();
    script.add_chat(&req, "<draw>   ");
    let rig = rig(&script, false);
    let mut s = Session::new(None);
    assert!(matches!(rig.engine.step(&mut s, user("draw")).await, Err(EngineError::ParseFailure(_))));
    assert!(s.history().is_empty());
}

#[tokio::test]
async fn two_step_applies_correction() {
    let t = PromptTemplates::default();
    let q = "I'd like to know more about rockets. Could you draw me a picture of rockets?";
    let mut script = MockScript::default();
    let expected = ConversationScript::new(&t, &mut script).two_step_turn(&user(q), ROCKET_ESSAY, ROCKET_FIX);
    let rig = rig(&script, true);
    let mut s = Session::new(Some(5));
    let r = rig.engine.step(&mut s, user(q)).await.unwrap();
    assert_eq!(r.modality, Modality::Image);
    assert_eq!(r.text, expected.text);
    assert!(r.text.starts_with("A rocket propelled upward by burning flames"));
    let trace = r.correction_trace.unwrap();
    assert_eq!(trace.first_response, ROCKET_ESSAY);
    let verdict = trace.verdict.unwrap();
    assert_eq!(verdict.kind, VerdictKind::Wrong);
    assert_eq!(verdict.violated_rule, Some(3));
    assert_eq!(rig.t2i.requests().len(), 1);
    assert_eq!(rig.chat.requests().len(), 2);
}

#[tokio::test]
async fn two_step_correct_verdict_matches_one_step() {
    let t = PromptTemplates::default();
    let mut one = MockScript::default();
    ConversationScript::new(&t, &mut one).turn(&user("draw a dog"), "<draw>A corgi on a beach.");
    let mut two = MockScript::default();
    ConversationScript::new(&t, &mut two).two_step_turn(&user("draw a dog"), "<draw>A corgi on a beach.", "###Correct");

    let r1 = rig(&one, false);
    let r2 = rig(&two, true);
    let mut s1 = Session::new(Some(3));
    let mut s2 = Session::new(Some(3));
    let a = r1.engine.step(&mut s1, user("draw a dog")).await.unwrap();
    let b = r2.engine.step(&mut s2, user("draw a dog")).await.unwrap();
    assert_eq!((a.modality, &a.text, &a.image), (b.modality, &b.text, &b.image));
    assert!(a.correction_trace.is_none());
    assert_eq!(b.correction_trace.unwrap().verdict.unwrap().kind, VerdictKind::Correct);
    assert_eq!(r2.t2i.requests().len(), 1);
}

#[tokio::test]
async fn two_step_malformed_verdict_falls_back() {
    let t = PromptTemplates::default();
    let mut script = MockScript::default();
    ConversationScript::new(&t, &mut script).two_step_turn(&user("tell me a joke"), "Why did the chicken cross the road?", "Looks fine to me.");
    let rig = rig(&script, true);
    let mut s = Session::new(None);
    let r = rig.engine.step(&mut s, user("tell me a joke")).await.unwrap();
    assert_eq!(r.modality, Modality::Text);
    assert_eq!(r.text, "Why did the chicken cross the road?");
    let trace = r.correction_trace.unwrap();
    assert!(trace.verdict.is_none());
    assert!(trace.fallback.unwrap().contains("unrecognized verdict"));
    assert!(rig.t2i.requests().is_empty());
}

#[tokio::test]
async fn replay_is_deterministic() {
    let t = PromptTemplates::default();
    let mut script = MockScript::default();
    let turns = [("draw a fox", "<draw>A red fox in snow."), ("make it night", "<draw>A red fox in snow at night."), ("thanks", "You're welcome.")];
    let mut cs = ConversationScript::new(&t, &mut script);
    for (u, a) in turns {
        cs.turn(&user(u), a);
    }
    let mut results = Vec::new();
    for _ in 0..2 {
        let rig = rig(&script, false);
        let mut s = Session::new(Some(1234));
        let mut out = Vec::new();
        for (u, _) in turns {
            out.push(rig.engine.step(&mut s, user(u)).await.unwrap());
        }
        results.push(out);
    }
    assert_eq!(results[0], results[1]);
}

#[tokio::test]
async fn snapshot_is_a_copy() {
    let t = PromptTemplates::default();
    let mut script = MockScript::default();
    let mut cs = ConversationScript::new(&t, &mut script);
    cs.turn(&user("a"), "b");
    cs.turn(&user("c"), "<draw>d");
    let rig = rig(&script, false);
    let mut s = Session::new(None);
    rig.engine.step(&mut s, user("a")).await.unwrap();
    let snap = s.snapshot();
    rig.engine.step(&mut s, user("c")).await.unwrap();
    assert_eq!(snap.len(), 1);
    assert_eq!(s.snapshot().len(), 2);
    assert!(s.snapshot()[1].image.is_some());
}

/// Answers every request after a delay.
struct SlowChat;

#[async_trait]
impl ChatBackend for SlowChat {
    async fn complete(&self, _request: &ChatRequest) -> Result<String, BackendError> {
        tokio::time::sleep(Duration::from_millis(150)).await;
        Ok("ok".into())
    }
}

fn slow_engine(policy: BusyPolicy) -> Engine {
    let config = EngineConfig { busy_policy: policy, ..EngineConfig::default() };
    Engine::new(config, Arc::new(SlowChat), Arc::new(MockT2i::new(ImageStore::in_memory())) as Arc<dyn T2iBackend>)
}

#[tokio::test]
async fn concurrent_turn_is_rejected_as_busy() {
    let engine = slow_engine(BusyPolicy::Reject);
    let store = SessionStore::new(8);
    let id = store.insert(Session::new(None)).lock().await.id().to_owned();
    let (a, b) = tokio::join!(engine.step_in(&store, &id, user("one")), async {
        tokio::time::sleep(Duration::from_millis(30)).await;
        engine.step_in(&store, &id, user("two")).await
    });
    assert!(a.is_ok());
    assert!(matches!(b, Err(EngineError::Busy(_))));
    assert_eq!(store.get(&id).unwrap().lock().await.history().len(), 1);
}

#[tokio::test]
async fn concurrent_turn_waits_when_configured() {
    let engine = slow_engine(BusyPolicy::Wait);
    let store = SessionStore::new(8);
    let id = store.insert(Session::new(None)).lock().await.id().to_owned();
    let (a, b) = tokio::join!(engine.step_in(&store, &id, user("one")), engine.step_in(&store, &id, user("two")));
    assert!(a.is_ok() && b.is_ok());
    assert_eq!(store.get(&id).unwrap().lock().await.history().len(), 2);
}

#[tokio::test]
async fn sessions_run_concurrently() {
    let engine = slow_engine(BusyPolicy::Reject);
    let store = SessionStore::new(8);
    let mut ids = Vec::new();
    for _ in 0..4 {
        ids.push(store.insert(Session::new(None)).lock().await.id().to_owned());
    }
    let started = std::time::Instant::now();
    let results = futures::future::join_all(ids.iter().map(|id| engine.step_in(&store, id, user("hi")))).await;
    assert!(results.iter().all(Result::is_ok));
    assert!(started.elapsed() < Duration::from_millis(500));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_t2i_request_in_a_session_uses_one_seed(draws in proptest::collection::vec(any::<bool>(), 1..8), seed in any::<Option<u64>>()) {
        let t = PromptTemplates::default();
        let mut script = MockScript::default();
        let mut cs = ConversationScript::new(&t, &mut script);
        let turns: Vec<(String, String)> = draws
            .iter()
            .enumerate()
            .map(|(i, d)| (format!("turn {i}"), if *d { format!("<draw>picture {i}") } else { format!("answer {i}") }))
            .collect();
        for (u, a) in &turns {
            cs.turn(&user(u), a);
        }
        let rig = rig(&script, false);
        let rt = tokio::runtime::Builder::new_current_thread().build().unwrap();
        let mut s = Session::new(seed);
        rt.block_on(async {
            for (u, _) in &turns {
                rig.engine.step(&mut s, user(u)).await.unwrap();
            }
        });
        let seeds: std::collections::BTreeSet<u64> = rig.t2i.requests().iter().map(|r| r.seed).collect();
        prop_assert!(seeds.len() <= 1);
        prop_assert_eq!(rig.t2i.requests().len(), draws.iter().filter(|d| **d).count());
        if let Some(s0) = seeds.into_iter().next() {
            prop_assert_eq!(s0, s.seed());
        }
        prop_assert_eq!(s.history().len(), turns.len());
    }
}
