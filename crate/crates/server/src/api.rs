//! JSON endpoints over an [`Engine`].
//!
//! Sessions live in memory once touched and are restored lazily from the
//! turn store, so a restarted service picks up where the log left off.
//! Turns on one session run one at a time in arrival order.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use taskbot_core::orchestrator::{Engine, ScreenPayload, Session, StoreError, Turn, MAX_UTTERANCE_CHARS};
use tower_http::cors::CorsLayer;

type SessionHandle = Arc<tokio::sync::Mutex<Session>>;

pub struct AppState {
    engine: Arc<Engine>,
    sessions: Mutex<HashMap<String, SessionHandle>>,
}

impl AppState {
    pub fn new(engine: Engine) -> Arc<Self> {
        Arc::new(Self {
            engine: Arc::new(engine),
            sessions: Mutex::new(HashMap::new()),
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    fn cached(&self, id: &str) -> Option<SessionHandle> {
        self.sessions.lock().expect("session map lock").get(id).cloned()
    }

    fn insert(&self, id: String, session: Session) -> SessionHandle {
        let mut map = self.sessions.lock().expect("session map lock");
        map.entry(id)
            .or_insert_with(|| Arc::new(tokio::sync::Mutex::new(session)))
            .clone()
    }

    fn evict(&self, id: &str) {
        self.sessions.lock().expect("session map lock").remove(id);
    }

    async fn session(&self, id: &str) -> Result<SessionHandle, ApiError> {
        if let Some(handle) = self.cached(id) {
            return Ok(handle);
        }
        let engine = self.engine.clone();
        let owned = id.to_string();
        let restored = tokio::task::spawn_blocking(move || engine.restore_session(&owned))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?;
        match restored {
            Ok(Some(session)) => Ok(self.insert(id.to_string(), session)),
            Ok(None) | Err(StoreError::InvalidId(_)) => Err(ApiError::not_found(format!("no session {id:?}"))),
            Err(e) => Err(ApiError::unavailable(e.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRequest {
    pub utterance: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebugInfo {
    pub action_code: String,
    pub policy: String,
    pub latency_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnResponse {
    pub response_text: String,
    pub screen: ScreenPayload,
    pub debug: DebugInfo,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub corpus_docs: usize,
    pub backend: String,
}

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn unavailable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/turns", post(post_turn))
        .route("/v1/sessions/{id}/history", get(history))
        .route("/v1/tasks/{id}", get(task))
        .route("/healthz", get(health))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

fn new_session_id() -> String {
    let mut bytes = [0u8; 16];
    rand::rng().fill_bytes(&mut bytes);
    hex::encode(bytes)
}

// the body is read and ignored so keep-alive connections stay usable
async fn create_session(
    State(state): State<Arc<AppState>>,
    _body: axum::body::Bytes,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let id = new_session_id();
    let engine = state.engine.clone();
    let owned = id.clone();
    let session = tokio::task::spawn_blocking(move || engine.create_session(&owned))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::unavailable(e.to_string()))?;
    state.insert(id.clone(), session);
    Ok((StatusCode::CREATED, Json(SessionCreated { session_id: id })))
}

async fn post_turn(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<TurnRequest>, JsonRejection>,
) -> Result<Json<TurnResponse>, ApiError> {
    let handle = state.session(&id).await?;
    let Json(request) = body.map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.body_text()))?;
    let chars = request.utterance.chars().count();
    if chars > MAX_UTTERANCE_CHARS {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("utterance has {chars} characters, the limit is {MAX_UTTERANCE_CHARS}"),
        ));
    }
    let mut guard = handle.lock_owned().await;
    let engine = state.engine.clone();
    let output = tokio::task::spawn_blocking(move || engine.handle_turn(&mut guard, &request.utterance))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
    if let Some(err) = output.persist_error {
        // drop the in-memory copy so the next request reloads what is on disk
        state.evict(&id);
        return Err(ApiError::unavailable(format!("turn not persisted: {err}")));
    }
    Ok(Json(TurnResponse {
        response_text: output.response_text,
        screen: output.screen,
        debug: DebugInfo {
            action_code: output.action_code,
            policy: output.policy,
            latency_ms: output.latency_ms,
        },
    }))
}

async fn history(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Vec<Turn>>, ApiError> {
    let handle = state.session(&id).await?;
    let session = handle.lock().await;
    Ok(Json(session.history.clone()))
}

async fn task(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match state.engine.catalog().task(&id) {
        Some(graph) => Json(graph).into_response(),
        None => ApiError::not_found(format!("no task {id:?}")).into_response(),
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        corpus_docs: state.engine.catalog().len(),
        backend: state.engine.gateway().backend_id().to_string(),
    })
}
