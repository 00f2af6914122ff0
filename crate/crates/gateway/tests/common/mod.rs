#![allow(dead_code)]

use std::path::{Path, PathBuf};

use midsmith_backends::mock::{MockScript, VqaScriptEntry};
use midsmith_backends::BackendConfig;
use midsmith_core::{load_dataset, ConversationRecord, Modality, ModalityScenario, PromptTemplates};
use midsmith_engine::derive_seed;
use midsmith_evalbench::script::{mock_image_address, reference_reply, script_one_step, wrong_reply};
use midsmith_gateway::AppConfig;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn golden_dir() -> PathBuf {
    fixtures().join("golden/mini_it2i_text")
}

pub fn mini() -> Vec<ConversationRecord> {
    load_dataset(fixtures().join("dialogben_mini.jsonl")).unwrap()
}

/// The golden system under test: wrong modality on every IT->I turn,
/// reference replies elsewhere.
pub fn it2i_failing_chat(data: &[ConversationRecord]) -> MockScript {
    script_one_step(data, &PromptTemplates::default(), |r, i| {
        if r.turns[i].scenario() == ModalityScenario::IMAGE_TEXT_TO_IMAGE {
            wrong_reply(&r.turns[i])
        } else {
            reference_reply(&r.turns[i])
        }
    })
}

/// VQA answers behind the golden report: 1.0 for the first question of a
/// turn, 0.5 for the rest.
pub fn golden_vqa(data: &[ConversationRecord]) -> MockScript {
    let mut script = MockScript::default();
    for r in data {
        for t in r.turns.iter().filter(|t| t.expected_modality == Modality::Image) {
            let prompt = reference_reply(t).trim_start_matches("<draw>").trim().to_owned();
            let image = mock_image_address(&prompt, derive_seed(&r.id), 512, 512);
            for (j, item) in t.vqa_items.iter().enumerate() {
                script.vqa.push(VqaScriptEntry {
                    image: image.clone(),
                    question: item.question.clone(),
                    prob: if j == 0 { 1.0 } else { 0.5 },
                });
            }
        }
    }
    script
}

pub fn write_script(dir: &Path, name: &str, script: &MockScript) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, script.to_json_pretty()).unwrap();
    p
}

/// Config rooted in `dir`, with the golden chat and VQA scripts.
pub fn golden_config(dir: &Path) -> AppConfig {
    let data = mini();
    let mut config = AppConfig::default();
    config.engine.chat = BackendConfig { script: Some(write_script(dir, "chat.json", &it2i_failing_chat(&data))), ..BackendConfig::mock() };
    config.vqa = BackendConfig { script: Some(write_script(dir, "vqa.json", &golden_vqa(&data))), ..BackendConfig::mock() };
    config.dataset_dir = fixtures();
    config.image_store_dir = dir.join("images");
    config.report_dir = dir.join("reports");
    config.vocab_file = fixtures().join("vocab.json");
    config
}

pub fn write_config(dir: &Path, config: &AppConfig) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(config).unwrap()).unwrap();
    p
}

pub mod http {
    use std::sync::Arc;

    use base64::Engine as _;
    use midsmith_backends::mock::{MockScript, MockT2i};
    use midsmith_core::{ContentAddress, ImageStore, PromptTemplates, UserTurnInput};
    use midsmith_engine::scripting::ConversationScript;
    use midsmith_engine::{Engine, EngineConfig};
    use midsmith_gateway::api::{History, MessageReply};
    use midsmith_gateway::{serve_on, AppConfig, AppState};
    use tokio::sync::oneshot;

    pub struct TestServer {
        pub base: String,
        pub client: reqwest::Client,
        shutdown: Option<oneshot::Sender<()>>,
        task: Option<tokio::task::JoinHandle<()>>,
    }

    impl TestServer {
        pub async fn start(state: AppState) -> Self {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            let base = format!("http://{}", listener.local_addr().unwrap());
            let (tx, rx) = oneshot::channel();
            let task = tokio::spawn(async move {
                serve_on(listener, state, async {
                    let _ = rx.await;
                })
                .await
                .unwrap();
            });
            TestServer { base, client: reqwest::Client::new(), shutdown: Some(tx), task: Some(task) }
        }

        pub fn url(&self, path: &str) -> String {
            format!("{}{path}", self.base)
        }

        pub async fn post_json(&self, path: &str, body: serde_json::Value) -> (u16, Vec<u8>) {
            let r = self.client.post(self.url(path)).json(&body).send().await.unwrap();
            (r.status().as_u16(), r.bytes().await.unwrap().to_vec())
        }

        pub async fn post_raw(&self, path: &str, body: &'static str) -> (u16, Vec<u8>) {
            let r = self
                .client
                .post(self.url(path))
                .header("content-type", "application/json")
                .body(body)
                .send()
                .await
                .unwrap();
            (r.status().as_u16(), r.bytes().await.unwrap().to_vec())
        }

        pub async fn get(&self, path: &str) -> (u16, Vec<u8>) {
            let r = self.client.get(self.url(path)).send().await.unwrap();
            (r.status().as_u16(), r.bytes().await.unwrap().to_vec())
        }

        /// Stop accepting and wait for in-flight requests to finish.
        pub async fn stop(mut self) {
            let _ = self.shutdown.take().unwrap().send(());
            self.task.take().unwrap().await.unwrap();
        }
    }

    pub fn json(bytes: &[u8]) -> serde_json::Value {
        serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(bytes)))
    }

    pub const PARITY_SEED: u64 = 7;

    /// A three-turn conversation: draw, edit an uploaded image, then talk.
    pub fn parity_turns(upload: &ContentAddress) -> Vec<(UserTurnInput, &'static str)> {
        vec![
            (
                UserTurnInput::text("Draw a squirrel eating a nut in the snow."),
                "<draw>A red squirrel eating a nut in the snow, the lens is close-up, the style is realistic.",
            ),
            (
                UserTurnInput::with_image("Put the lighthouse in this picture on a sandy beach.", upload.clone()),
                "<draw>A white lighthouse on a sandy beach, the shot is panoramic, the style is realistic.",
            ),
            (UserTurnInput::text("Which animal did you draw first?"), "I drew a red squirrel eating a nut."),
        ]
    }

    pub fn upload_bytes() -> Vec<u8> {
        std::fs::read(super::fixtures().join("images/27de09396163d18e981809d924cea5cf7966f072b48b6360dd1883473aaf329a"))
            .unwrap()
    }

    fn scripted_engine(config: &EngineConfig, script: &MockScript, store: &ImageStore) -> Engine {
        Engine::new(config.clone(), Arc::new(script.chat_backend()), Arc::new(MockT2i::new(store.clone())))
    }

    pub struct ParityRun {
        pub direct_replies: Vec<Vec<u8>>,
        pub http_replies: Vec<Vec<u8>>,
        pub direct_entries: Vec<u8>,
        pub http_entries: Vec<u8>,
        pub direct_images: Vec<Vec<u8>>,
        pub http_images: Vec<Vec<u8>>,
        pub http_seed: u64,
    }

    /// Run the parity conversation through the engine directly and over
    /// HTTP, each with its own backends and image store.
    pub async fn parity_run() -> ParityRun {
        let bytes = upload_bytes();
        let upload = ContentAddress::of(&bytes);
        let turns = parity_turns(&upload);
        let templates = PromptTemplates::default();
        let mut script = MockScript::default();
        let mut conv = ConversationScript::new(&templates, &mut script);
        for (user, reply) in &turns {
            conv.turn(user, reply);
        }
        let config = EngineConfig::default();

        let direct_store = ImageStore::in_memory();
        let engine = scripted_engine(&config, &script, &direct_store);
        let mut session = engine.new_session(Some(PARITY_SEED));
        let mut direct_replies = Vec::new();
        let mut direct_images = Vec::new();
        for (user, _) in &turns {
            if user.image_ref.is_some() {
                direct_store.put(&bytes).unwrap();
            }
            let result = engine.step(&mut session, user.clone()).await.unwrap();
            if let Some(img) = &result.image {
                direct_images.push(direct_store.get(&img.content_address).unwrap().unwrap());
            }
            direct_replies.push(serde_json::to_vec(&MessageReply::from(result)).unwrap());
        }
        let direct_entries =
            serde_json::to_vec(&History::new(String::new(), session.seed(), session.snapshot()).entries).unwrap();

        let http_store = ImageStore::in_memory();
        let state = AppState::new(AppConfig::default(), scripted_engine(&config, &script, &http_store), http_store);
        let server = TestServer::start(state).await;
        let (status, body) = server.post_json("/v1/sessions", serde_json::json!({ "seed": PARITY_SEED })).await;
        assert_eq!(status, 201);
        let created = json(&body);
        let id = created["session_id"].as_str().unwrap().to_owned();
        let mut http_replies = Vec::new();
        let mut http_images = Vec::new();
        for (user, _) in &turns {
            let mut msg = serde_json::json!({ "text": user.text });
            if user.image_ref.is_some() {
                msg["image_b64"] = base64::engine::general_purpose::STANDARD.encode(&bytes).into();
            }
            let (status, body) = server.post_json(&format!("/v1/sessions/{id}/messages"), msg).await;
            assert_eq!(status, 200, "{}", String::from_utf8_lossy(&body));
            if let Some(url) = json(&body)["image_url"].as_str() {
                let (status, img) = server.get(url).await;
                assert_eq!(status, 200);
                http_images.push(img);
            }
            http_replies.push(body);
        }
        let (status, body) = server.get(&format!("/v1/sessions/{id}/history")).await;
        assert_eq!(status, 200);
        let history: History = serde_json::from_slice(&body).unwrap();
        assert_eq!(history.session_id, id);
        let http_entries = serde_json::to_vec(&history.entries).unwrap();
        server.stop().await;
        ParityRun {
            direct_replies,
            http_replies,
            direct_entries,
            http_entries,
            direct_images,
            http_images,
            http_seed: created["seed"].as_u64().unwrap(),
        }
    }
}
