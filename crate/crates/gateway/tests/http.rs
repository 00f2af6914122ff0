mod common;

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use common::http::{json, parity_run, TestServer, PARITY_SEED};
use midsmith_backends::mock::{MockScript, MockT2i};
use midsmith_backends::{BackendError, ChatBackend};
use midsmith_core::{ChatRequest, ContentAddress, ImageStore, PromptTemplates, UserTurnInput};
use midsmith_engine::scripting::ConversationScript;
use midsmith_engine::{Engine, EngineConfig};
use midsmith_gateway::{AppConfig, AppState};

#[tokio::test]
async fn three_turn_conversation_matches_direct_engine() {
    let run = parity_run().await;
    assert_eq!(run.http_seed, PARITY_SEED);
    assert_eq!(run.direct_replies.len(), 3);
    for (i, (d, h)) in run.direct_replies.iter().zip(&run.http_replies).enumerate() {
        assert_eq!(String::from_utf8_lossy(d), String::from_utf8_lossy(h), "turn {}", i + 1);
    }
    assert_eq!(run.direct_entries, run.http_entries);
    assert_eq!(run.direct_images.len(), 2);
    assert_eq!(run.direct_images, run.http_images);

    let first = json(&run.http_replies[0]);
    assert_eq!(first["modality"], "image");
    assert_eq!(first["drawing_prompt"], first["text"]);
    assert!(first["image_url"].as_str().unwrap().starts_with("/images/"));
    let third = json(&run.http_replies[2]);
    assert_eq!(third["modality"], "text");
    assert!(third.get("image_url").is_none() && third.get("drawing_prompt").is_none());
}

fn scripted_state(script: &MockScript, config: AppConfig) -> AppState {
    let store = ImageStore::in_memory();
    let engine =
        Engine::new(config.engine.clone(), Arc::new(script.chat_backend()), Arc::new(MockT2i::new(store.clone())));
    AppState::new(config, engine, store)
}

async fn create(server: &TestServer) -> String {
    let (status, body) = server.post_raw("/v1/sessions", "").await;
    assert_eq!(status, 201);
    json(&body)["session_id"].as_str().unwrap().to_owned()
}

#[tokio::test]
async fn health_and_session_creation() {
    let server = TestServer::start(scripted_state(&MockScript::default(), AppConfig::default())).await;
    let (status, body) = server.get("/v1/health").await;
    assert_eq!(status, 200);
    assert_eq!(json(&body)["version"], midsmith_gateway::VERSION);

    let (status, body) = server.post_json("/v1/sessions", serde_json::json!({})).await;
    assert_eq!(status, 201);
    let v = json(&body);
    assert!(v["session_id"].as_str().is_some_and(|s| !s.is_empty()));
    assert!(v["seed"].is_u64());

    let id = create(&server).await;
    let (status, body) = server.get(&format!("/v1/sessions/{id}/history")).await;
    assert_eq!(status, 200);
    assert_eq!(json(&body)["entries"], serde_json::json!([]));
    server.stop().await;
}

fn error_kind(body: &[u8]) -> String {
    json(body)["error"].as_str().unwrap().to_owned()
}

#[tokio::test]
async fn error_statuses() {
    let server = TestServer::start(scripted_state(&MockScript::default(), AppConfig::default())).await;
    let id = create(&server).await;
    let msgs = format!("/v1/sessions/{id}/messages");

    let (status, body) = server.post_json("/v1/sessions/nope/messages", serde_json::json!({"text": "hi"})).await;
    assert_eq!((status, error_kind(&body).as_str()), (404, "not_found"));
    let (status, _) = server.get("/v1/sessions/nope/history").await;
    assert_eq!(status, 404);

    let (status, body) = server.post_json(&msgs, serde_json::json!({"text": "hi", "image_b64": "***"})).await;
    assert_eq!((status, error_kind(&body).as_str()), (400, "invalid_input"));
    let (status, _) = server.post_raw(&msgs, "{not json").await;
    assert_eq!(status, 400);
    let (status, body) = server.post_json(&msgs, serde_json::json!({"text": "   "})).await;
    assert_eq!((status, error_kind(&body).as_str()), (400, "invalid_input"));

    // Nothing scripted for this request: the backend fails and the kind is
    // passed through.
    let (status, body) = server.post_json(&msgs, serde_json::json!({"text": "hello"})).await;
    assert_eq!((status, error_kind(&body).as_str()), (502, "script_miss"));

    let (status, _) = server.get("/images/not-an-address").await;
    assert_eq!(status, 400);
    let (status, _) = server.get(&format!("/images/{}", ContentAddress::of(b"missing"))).await;
    assert_eq!(status, 404);
    let (status, _) = server.get("/v1/eval/unknown").await;
    assert_eq!(status, 404);
    let (status, _) = server.post_json("/v1/eval", serde_json::json!({"coherence": true})).await;
    assert_eq!(status, 400);
    server.stop().await;
}

#[tokio::test]
async fn unparseable_model_output_is_a_gateway_error() {
    let templates = PromptTemplates::default();
    let mut script = MockScript::default();
    let user = UserTurnInput::text("Draw nothing.");
    let req = midsmith_core::protocol::build_inference_request(&templates, &[], &user).unwrap();
    script.add_chat(&req, "<draw>   ");
    let server = TestServer::start(scripted_state(&script, AppConfig::default())).await;
    let id = create(&server).await;
    let (status, body) =
        server.post_json(&format!("/v1/sessions/{id}/messages"), serde_json::json!({"text": "Draw nothing."})).await;
    assert_eq!((status, error_kind(&body).as_str()), (502, "parse_failure"));
    // The failed turn left no trace.
    let (_, body) = server.get(&format!("/v1/sessions/{id}/history")).await;
    assert_eq!(json(&body)["entries"], serde_json::json!([]));
    server.stop().await;
}

#[tokio::test]
async fn evicted_session_is_gone() {
    let config = AppConfig { session_capacity: 1, ..AppConfig::default() };
    let server = TestServer::start(scripted_state(&MockScript::default(), config)).await;
    let first = create(&server).await;
    create(&server).await;
    let (status, body) = server.get(&format!("/v1/sessions/{first}/history")).await;
    assert_eq!((status, error_kind(&body).as_str()), (410, "evicted"));
    server.stop().await;
}

/// Answers every request in text after a delay.
struct SlowChat;

#[async_trait]
impl ChatBackend for SlowChat {
    async fn complete(&self, _request: &ChatRequest) -> Result<String, BackendError> {
        tokio::time::sleep(Duration::from_millis(300)).await;
        Ok("Still thinking about it.".into())
    }
}

#[tokio::test]
async fn concurrent_turn_on_one_session_is_busy() {
    let store = ImageStore::in_memory();
    let engine = Engine::new(EngineConfig::default(), Arc::new(SlowChat), Arc::new(MockT2i::new(store.clone())));
    let server = TestServer::start(AppState::new(AppConfig::default(), engine, store)).await;
    let id = create(&server).await;
    let other = create(&server).await;
    let path = format!("/v1/sessions/{id}/messages");
    let msg = serde_json::json!({"text": "Tell me a story."});
    let (a, b, c) = tokio::join!(
        server.post_json(&path, msg.clone()),
        async {
            tokio::time::sleep(Duration::from_millis(100)).await;
            server.post_json(&path, msg.clone()).await
        },
        async {
            tokio::time::sleep(Duration::from_millis(100)).await;
            server.post_json(&format!("/v1/sessions/{other}/messages"), msg.clone()).await
        }
    );
    assert_eq!(a.0, 200);
    assert_eq!((b.0, error_kind(&b.1).as_str()), (409, "busy"));
    // Other sessions are unaffected.
    assert_eq!(c.0, 200);
    server.stop().await;
}

#[tokio::test]
async fn shutdown_waits_for_in_flight_turns() {
    let store = ImageStore::in_memory();
    let engine = Engine::new(EngineConfig::default(), Arc::new(SlowChat), Arc::new(MockT2i::new(store.clone())));
    let server = TestServer::start(AppState::new(AppConfig::default(), engine, store)).await;
    let id = create(&server).await;
    let client = server.client.clone();
    let url = server.url(&format!("/v1/sessions/{id}/messages"));
    let turn = tokio::spawn(async move {
        client.post(url).json(&serde_json::json!({"text": "Tell me a story."})).send().await.unwrap().status().as_u16()
    });
    tokio::time::sleep(Duration::from_millis(100)).await;
    server.stop().await;
    assert_eq!(turn.await.unwrap(), 200);
}

#[tokio::test]
async fn two_step_turn_returns_correction_trace() {
    let templates = PromptTemplates::default();
    let mut script = MockScript::default();
    let user = UserTurnInput::text("Draw a rocket launching at night.");
    ConversationScript::new(&templates, &mut script).two_step_turn(
        &user,
        "A rocket is a vehicle that flies into space.",
        "###Wrong### The output violates rule 1. The user asked for a picture.\nCorrect Solution: <draw>A rocket launching at night, the shot is panoramic, the style is realistic.",
    );
    let mut config = AppConfig::default();
    config.engine.two_step = true;
    let server = TestServer::start(scripted_state(&script, config)).await;
    let id = create(&server).await;
    let (status, body) = server.post_json(&format!("/v1/sessions/{id}/messages"), serde_json::json!({"text": user.text})).await;
    assert_eq!(status, 200, "{}", String::from_utf8_lossy(&body));
    let reply = json(&body);
    assert_eq!(reply["modality"], "image");
    assert_eq!(reply["correction_trace"]["verdict"]["violated_rule"], 1);
    assert_eq!(reply["correction_trace"]["first_response"], "A rocket is a vehicle that flies into space.");

    let (_, body) = server.get(&format!("/v1/sessions/{id}/history")).await;
    let entries = json(&body)["entries"].clone();
    assert_eq!(entries[0]["role"], "user");
    assert_eq!(entries[1]["role"], "assistant");
    assert_eq!(entries[1]["drawing_prompt"], reply["drawing_prompt"]);
    assert_eq!(entries[1]["image_url"], reply["image_url"]);
    assert_eq!(entries[1]["correction_trace"], reply["correction_trace"]);
    server.stop().await;
}
