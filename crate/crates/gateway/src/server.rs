use std::future::Future;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use midsmith_core::store::sniff_mime;
use midsmith_core::{ImageStore, UserTurnInput};
use midsmith_engine::{Engine, EngineError, SessionStore};
use serde::de::DeserializeOwned;
use tokio::net::TcpListener;

use crate::api::{
    parse_address, CreateSession, EvalAccepted, EvalRequest, Health, History, MessageReply, PostMessage,
    SessionCreated,
};
use crate::config::{AppConfig, ConfigError};
use crate::jobs::{JobQueue, JobRunner};

/// Shared state behind every route.
#[derive(Clone)]
pub struct AppState {
    pub config: Arc<AppConfig>,
    pub engine: Arc<Engine>,
    pub sessions: Arc<SessionStore>,
    pub store: ImageStore,
    pub jobs: JobQueue,
}

impl AppState {
    /// Build the engine and image store described by `config`. Must run
    /// inside a tokio runtime (the eval worker is spawned here).
    pub fn from_config(config: AppConfig) -> Result<Self, ServeError> {
        config.ensure_dirs()?;
        let store = ImageStore::open_dir(&config.image_store_dir)
            .map_err(|source| ConfigError::Io { path: config.image_store_dir.clone(), source })?;
        let engine = Engine::from_config(config.engine.clone(), &store).map_err(|e| ServeError::Engine(e.to_string()))?;
        Ok(Self::new(config, engine, store))
    }

    /// Use a prebuilt engine; it should share `store` with its backends.
    pub fn new(config: AppConfig, engine: Engine, store: ImageStore) -> Self {
        let config = Arc::new(config);
        let sessions = Arc::new(SessionStore::new(config.session_capacity));
        let jobs = JobQueue::start(JobRunner::new(config.clone(), store.clone()));
        AppState { config, engine: Arc::new(engine), sessions, store, jobs }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("engine setup failed: {0}")]
    Engine(String),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Error response: a status plus `{"error": kind, "message": …}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        ApiError { status, kind: kind.into(), message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_input", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::InvalidInput(_) => StatusCode::BAD_REQUEST,
            EngineError::NotFound(_) => StatusCode::NOT_FOUND,
            EngineError::Busy(_) => StatusCode::CONFLICT,
            EngineError::Evicted(_) => StatusCode::GONE,
            EngineError::Backend(_) | EngineError::ParseFailure(_) => StatusCode::BAD_GATEWAY,
        };
        Self::new(status, e.kind(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = crate::api::ErrorBody { error: self.kind, message: self.message };
        (self.status, Json(body)).into_response()
    }
}

/// Lenient body parsing: an empty body means all defaults.
fn parse_body<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    parse_required(body)
}

fn parse_required<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

async fn health() -> Json<Health> {
    Json(Health { version: crate::VERSION.into() })
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let session = state.engine.new_session(req.seed);
    let created = SessionCreated { session_id: session.id().to_owned(), seed: session.seed() };
    state.sessions.insert(session);
    Ok((StatusCode::CREATED, Json(created)))
}

async fn post_message(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<MessageReply>, ApiError> {
    let req: PostMessage = parse_required(&body)?;
    state.sessions.get(&id)?;
    let image_ref = match req.image_b64 {
        Some(b64) => {
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(b64.trim())
                .map_err(|e| ApiError::bad_request(format!("image_b64: {e}")))?;
            let stored = state
                .store
                .put(&bytes)
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "io", e.to_string()))?;
            Some(stored.content_address)
        }
        None => None,
    };
    let user = UserTurnInput { text: req.text, image_ref };
    let result = state.engine.step_in(&state.sessions, &id, user).await?;
    Ok(Json(result.into()))
}

async fn history(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<History>, ApiError> {
    let handle = state.sessions.get(&id)?;
    let session = handle.lock().await;
    Ok(Json(History::new(id, session.seed(), session.snapshot())))
}

async fn image(State(state): State<AppState>, Path(addr): Path<String>) -> Result<Response, ApiError> {
    let addr = parse_address(&addr).ok_or_else(|| ApiError::bad_request(format!("not a content address: {addr:?}")))?;
    let bytes = state
        .store
        .get(&addr)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "io", e.to_string()))?
        .ok_or_else(|| ApiError::not_found(format!("no image {addr}")))?;
    Ok(([(header::CONTENT_TYPE, sniff_mime(&bytes))], bytes).into_response())
}

async fn submit_eval(State(state): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: EvalRequest = parse_required(&body)?;
    let job_id = state.jobs.submit(req);
    Ok((StatusCode::ACCEPTED, Json(EvalAccepted { job_id })))
}

async fn get_eval(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    state.jobs.get(&id).map(Json).ok_or_else(|| ApiError::not_found(format!("unknown eval job {id}")))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/messages", post(post_message))
        .route("/v1/sessions/{id}/history", get(history))
        .route("/v1/eval", post(submit_eval))
        .route("/v1/eval/{id}", get(get_eval))
        .route("/images/{addr}", get(image))
        .with_state(state)
}

/// Serve on an already bound listener until `shutdown` resolves. In-flight
/// requests finish before this returns.
pub async fn serve_on(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

/// Bind `config.listen_addr` and serve until Ctrl-C.
pub async fn serve(config: AppConfig) -> Result<(), ServeError> {
    let addr = config.listen_addr.clone();
    let state = AppState::from_config(config)?;
    let listener = TcpListener::bind(&addr).await.map_err(|source| ServeError::Bind { addr: addr.clone(), source })?;
    tracing::info!(%addr, "listening");
    serve_on(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
        tracing::info!("shutting down");
    })
    .await
}
