//! HTTP session service.
//!
//! Each session keeps an immutable [`SessionState`] behind an `Arc`: reads
//! clone the pointer and work on the snapshot, commits take the session's
//! writer lock and swap in the next state.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::session::{CreateSession, FeedbackRequest, Proposal, SessionState, SessionSummary};
use crate::store::{Store, StoreError};

struct SessionHandle {
    state: RwLock<Arc<SessionState>>,
    proposals: Mutex<HashMap<String, Proposal>>,
    writer: Mutex<()>,
}

impl SessionHandle {
    fn new(state: SessionState) -> Self {
        SessionHandle {
            state: RwLock::new(Arc::new(state)),
            proposals: Mutex::new(HashMap::new()),
            writer: Mutex::new(()),
        }
    }

    fn snapshot(&self) -> Arc<SessionState> {
        self.state.read().expect("session lock poisoned").clone()
    }
}

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<SessionHandle>>>>,
    store: Option<Store>,
}

impl AppState {
    /// An empty in-memory service.
    pub fn in_memory() -> Self {
        AppState { sessions: Arc::default(), store: None }
    }

    /// A service persisting to `store`, preloaded with its sessions.
    pub fn with_store(store: Store) -> Result<Self, StoreError> {
        let loaded = store.load_all()?;
        let sessions = loaded.into_iter().map(|s| (s.id.clone(), Arc::new(SessionHandle::new(s)))).collect();
        Ok(AppState { sessions: Arc::new(RwLock::new(sessions)), store: Some(store) })
    }

    fn handle(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no session {id}")))
    }

    fn persist(&self, state: &SessionState) -> Result<(), ApiError> {
        if let Some(store) = &self.store {
            store.save(state).map_err(|e| ApiError::Internal(e.to_string()))?;
        }
        Ok(())
    }

    pub fn summaries(&self) -> Vec<SessionSummary> {
        let mut out: Vec<SessionSummary> = self
            .sessions
            .read()
            .expect("session map poisoned")
            .values()
            .map(|h| h.snapshot().summary())
            .collect();
        out.sort_by(|a, b| (a.created_at, &a.session_id).cmp(&(b.created_at, &b.session_id)));
        out
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/sessions", post(create_session).get(list_sessions))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/validate-rule", post(validate_rule))
        .route("/api/sessions/{id}/feedback", post(feedback))
        .route("/api/sessions/{id}/commit", post(commit))
        .route("/api/sessions/{id}/history", get(history))
        .with_state(state)
}

pub async fn serve(state: AppState, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

/// JSON bodies are parsed here so that malformed input is a 400 with the
/// same error shape as every other failure.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

/// Runs CPU-bound session work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))?
}

async fn healthz() -> &'static str {
    "ok"
}

#[derive(Serialize)]
struct Created {
    session_id: String,
}

async fn create_session(State(app): State<AppState>, bytes: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: CreateSession = body(&bytes)?;
    let state = blocking(move || SessionState::create(req, new_id(), now())).await?;
    app.persist(&state)?;
    let id = state.id.clone();
    app.sessions
        .write()
        .expect("session map poisoned")
        .insert(id.clone(), Arc::new(SessionHandle::new(state)));
    Ok((StatusCode::CREATED, Json(Created { session_id: id })))
}

async fn list_sessions(State(app): State<AppState>) -> impl IntoResponse {
    Json(app.summaries())
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let snap = app.handle(&id)?.snapshot();
    Ok(Json(blocking(move || snap.view()).await?))
}

#[derive(Deserialize)]
struct RuleText {
    text: String,
}

async fn validate_rule(
    State(app): State<AppState>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: RuleText = body(&bytes)?;
    let snap = app.handle(&id)?.snapshot();
    Ok(Json(blocking(move || snap.validate_rule(&req.text)).await?))
}

async fn feedback(
    State(app): State<AppState>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: FeedbackRequest = body(&bytes)?;
    let handle = app.handle(&id)?;
    let snap = handle.snapshot();
    let proposal = blocking(move || snap.propose(&req, new_id)).await?;
    handle
        .proposals
        .lock()
        .expect("proposal lock poisoned")
        .insert(proposal.proposal_id.clone(), proposal.clone());
    Ok(Json(proposal))
}

#[derive(Deserialize)]
struct CommitRequest {
    proposal_id: String,
    outcome_id: String,
}

async fn commit(
    State(app): State<AppState>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: CommitRequest = body(&bytes)?;
    let handle = app.handle(&id)?;
    let next = {
        let _writer = handle.writer.lock().expect("writer lock poisoned");
        let proposal = handle
            .proposals
            .lock()
            .expect("proposal lock poisoned")
            .get(&req.proposal_id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no proposal {} in session {id}", req.proposal_id)))?;
        let current = handle.snapshot();
        let next = current.commit(&proposal, &req.outcome_id, now())?;
        app.persist(&next)?;
        if let Some(store) = &app.store {
            let entry = next.history.last().expect("commit appends an entry");
            store.append_history(&next.id, entry).map_err(|e| ApiError::Internal(e.to_string()))?;
        }
        if let Some(p) = handle.proposals.lock().expect("proposal lock poisoned").get_mut(&req.proposal_id) {
            p.committed = Some(req.outcome_id.clone());
        }
        let next = Arc::new(next);
        *handle.state.write().expect("session lock poisoned") = next.clone();
        next
    };
    Ok(Json(blocking(move || next.view()).await?))
}

async fn history(State(app): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let snap = app.handle(&id)?.snapshot();
    Ok(Json(blocking(move || snap.history_view()).await?))
}
