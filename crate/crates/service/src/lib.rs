//! REST surface over design sessions. Each session is stepped under its own
//! lock on a blocking thread, since a step may wait on a model.

pub mod store;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use nesy_core::agents::CompletionBackend;
use nesy_core::export;
use nesy_core::rag::Corpus;
use nesy_core::workflow::{self, HumanDecision, Phase, SessionState, WorkflowConfig, WorkflowError};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub use store::{Envelope, FileStore, StoreError};

/// Bearer token required on every route but `/health` when set.
pub const TOKEN_ENV: &str = "NESY_TOKEN";
pub const DATA_DIR_ENV: &str = "NESY_DATA_DIR";

struct Session {
    state: SessionState,
    envelope: Envelope,
}

type Shared = Arc<Mutex<Session>>;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    store: FileStore,
    corpus: Corpus,
    backend: Arc<dyn CompletionBackend>,
    token: Option<String>,
    sessions: Mutex<HashMap<String, Shared>>,
}

impl AppState {
    pub fn new(store: FileStore, corpus: Corpus, backend: Arc<dyn CompletionBackend>, token: Option<String>) -> Self {
        AppState {
            inner: Arc::new(Inner { store, corpus, backend, token, sessions: Mutex::new(HashMap::new()) }),
        }
    }

    /// The in-memory session, loading it from disk on first use.
    fn session(&self, id: &str) -> Result<Shared, ApiError> {
        let mut sessions = self.inner.sessions.lock().expect("session map lock");
        if let Some(s) = sessions.get(id) {
            return Ok(s.clone());
        }
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(ApiError::NotFound(format!("session `{id}`")));
        }
        let (state, envelope) = self.inner.store.load(id).map_err(ApiError::from)?;
        let shared = Arc::new(Mutex::new(Session { state, envelope }));
        sessions.insert(id.to_string(), shared.clone());
        Ok(shared)
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    BadRequest(String),
    Conflict(String),
    Unauthorized,
    Internal { message: String, retryable: bool },
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => ApiError::NotFound(format!("session `{id}`")),
            e => ApiError::Internal { message: e.to_string(), retryable: false },
        }
    }
}

impl From<WorkflowError> for ApiError {
    fn from(e: WorkflowError) -> Self {
        match e {
            WorkflowError::NotAtGate { .. } | WorkflowError::WrongGate { .. } | WorkflowError::NotFinished => {
                ApiError::Conflict(e.to_string())
            }
            WorkflowError::InvalidDecision(m) => ApiError::BadRequest(m),
            e => ApiError::Internal { retryable: e.is_retryable(), message: e.to_string() },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::NotFound(what) => (StatusCode::NOT_FOUND, json!({"error": format!("{what} not found")})),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({"error": m})),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, json!({"error": m})),
            ApiError::Unauthorized => (StatusCode::UNAUTHORIZED, json!({"error": "missing or wrong bearer token"})),
            ApiError::Internal { message, retryable } => {
                (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": message, "retryable": retryable}))
            }
        };
        (status, Json(body)).into_response()
    }
}

async fn require_token(State(app): State<AppState>, headers: HeaderMap, request: Request, next: Next) -> Response {
    if let Some(token) = &app.inner.token {
        let given = headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()).and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return ApiError::Unauthorized.into_response();
        }
    }
    next.run(request).await
}

pub fn router(app: AppState) -> Router {
    let guarded = Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/step", post(step_session))
        .route("/sessions/{id}/feedback", post(submit_feedback))
        .route("/sessions/{id}/mapping", post(submit_mapping))
        .route("/sessions/{id}/export.ipynb", get(export_notebook))
        .route_layer(middleware::from_fn_with_state(app.clone(), require_token));
    Router::new().route("/health", get(health)).merge(guarded).with_state(app)
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

#[derive(Debug, Deserialize)]
struct CreateRequest {
    task: String,
    #[serde(default)]
    config: Option<WorkflowConfig>,
    #[serde(default)]
    owner: Option<String>,
}

#[derive(Debug, Serialize)]
struct SessionSummary {
    session_id: String,
    phase: Phase,
    task: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    owner: Option<String>,
    created_at: u64,
    updated_at: u64,
}

fn summary(s: &Session) -> SessionSummary {
    SessionSummary {
        session_id: s.state.session_id.clone(),
        phase: s.state.phase,
        task: s.state.task.clone(),
        owner: s.envelope.owner.clone(),
        created_at: s.envelope.created_at,
        updated_at: s.envelope.updated_at,
    }
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid request body: {e}")))
}

/// Runs `f` on the session under its lock, off the async runtime, and
/// persists whatever events it added, even when it fails.
async fn with_session<T: Send + 'static>(
    app: &AppState,
    id: String,
    f: impl FnOnce(&mut SessionState, &Inner) -> Result<T, ApiError> + Send + 'static,
) -> Result<(T, SessionSummary), ApiError> {
    let shared = app.session(&id)?;
    let app = app.clone();
    tokio::task::spawn_blocking(move || {
        let mut session = shared.lock().expect("session lock");
        let before = session.state.events.len();
        let result = f(&mut session.state, &app.inner);
        if session.state.events.len() > before {
            let envelope = app.inner.store.save(&session.state, before, &session.envelope)?;
            session.envelope = envelope;
        }
        result.map(|v| (v, summary(&session)))
    })
    .await
    .map_err(|e| ApiError::Internal { message: e.to_string(), retryable: false })?
}

async fn create_session(State(app): State<AppState>, body: axum::body::Bytes) -> Result<Response, ApiError> {
    let req: CreateRequest = parse_body(&body)?;
    if req.task.trim().is_empty() {
        return Err(ApiError::BadRequest("task must not be empty".into()));
    }
    let id = uuid::Uuid::new_v4().simple().to_string();
    let state = SessionState::new(&id, &req.task, req.config.unwrap_or_default());
    let envelope = app.inner.store.create(&state, req.owner.as_deref())?;
    let session = Session { state, envelope };
    let body = summary(&session);
    app.inner.sessions.lock().expect("session map lock").insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn list_sessions(State(app): State<AppState>) -> Result<Json<Vec<SessionSummary>>, ApiError> {
    let ids = app.inner.store.list()?;
    let mut out = Vec::new();
    for id in ids {
        let shared = app.session(&id)?;
        out.push(summary(&shared.lock().expect("session lock")));
    }
    Ok(Json(out))
}

async fn get_state(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionState>, ApiError> {
    let shared = app.session(&id)?;
    let state = shared.lock().expect("session lock").state.clone();
    Ok(Json(state))
}

async fn step_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let (outcome, _) = with_session(&app, id, |state, inner| {
        if let Some(gate) = state.phase.gate() {
            if !state.config.auto_approve {
                return Err(ApiError::Conflict(format!("session waits for human input at the {gate} gate")));
            }
        }
        Ok(workflow::step(state, inner.backend.as_ref(), &inner.corpus)?)
    })
    .await?;
    Ok(Json(outcome).into_response())
}

async fn submit_feedback(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: axum::body::Bytes,
) -> Result<Json<SessionSummary>, ApiError> {
    let decision: HumanDecision = parse_body(&body)?;
    let ((), summary) = with_session(&app, id, move |state, _| Ok(workflow::submit_human(state, decision)?)).await?;
    Ok(Json(summary))
}

#[derive(Debug, Deserialize)]
struct MappingRequest {
    mapping: String,
}

async fn submit_mapping(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: axum::body::Bytes,
) -> Result<Json<SessionSummary>, ApiError> {
    let req: MappingRequest = parse_body(&body)?;
    let ((), summary) =
        with_session(&app, id, move |state, _| Ok(workflow::provide_mapping(state, &req.mapping)?)).await?;
    Ok(Json(summary))
}

async fn export_notebook(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let shared = app.session(&id)?;
    let session = shared.lock().expect("session lock");
    let bundle = match (&session.state.bundle, session.state.phase) {
        (Some(b), Phase::Export | Phase::Done) => b,
        _ => return Err(ApiError::Conflict(format!("session is in phase {}, nothing to export", session.state.phase))),
    };
    let text = export::notebook(bundle).map_err(|e| ApiError::Internal { message: e.to_string(), retryable: false })?;
    Ok(([(header::CONTENT_TYPE, "application/x-ipynb+json")], text).into_response())
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(app: AppState, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(app)).await
}
