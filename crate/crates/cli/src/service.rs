//! Local HTTP service.
//!
//! Bodies are JSON documents carrying `"schema": 1`. Parse failures answer
//! 400, solver and validation failures 422, unknown sessions 404; all of
//! them with an `{"error": {"code", "message"}}` body.

use std::convert::Infallible;
use std::path::Path;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use futures::StreamExt;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use softsnap_core::io::{from_document_json, PatternDocument};
use softsnap_core::{sweep_contraction_each, EquilibriumProblem, Error, SkeletonConfig};
use tokio::sync::mpsc;
use tokio::task::JoinHandle;

use crate::api::{self, DesignRequest, ErrorDetail, ErrorResponse, SolveRequest, SweepEvent, SweepRequest, SweepRow};
use crate::store::{SessionStore, StoreError};

/// Rows buffered between the sweep worker and a slow client.
const SWEEP_BUFFER: usize = 8;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/v1/default-config", get(default_config))
        .route("/api/v1/solve", post(solve))
        .route("/api/v1/sweep", post(sweep))
        .route("/api/v1/design", post(design))
        .route("/api/v1/sessions", get(list_sessions).post(create_session))
        .route("/api/v1/sessions/{id}", get(get_session))
        .route("/api/v1/sessions/{id}/history", post(append_history))
        .route("/api/v1/sessions/{id}/patterns", post(save_pattern))
        .with_state(state)
}

/// Router backed by the session store in `data_dir`.
pub fn app(data_dir: &Path) -> Result<Router, StoreError> {
    let store = Arc::new(SessionStore::open(data_dir)?);
    Ok(router(AppState { store }))
}

pub enum ApiError {
    BadRequest(Error),
    Domain(Error),
    Store(StoreError),
    Internal(String),
}

impl ApiError {
    fn parts(&self) -> (StatusCode, ErrorDetail) {
        match self {
            ApiError::BadRequest(e) => (StatusCode::BAD_REQUEST, ErrorDetail::from(e)),
            ApiError::Domain(e) => (StatusCode::UNPROCESSABLE_ENTITY, ErrorDetail::from(e)),
            ApiError::Store(e) => {
                let (status, code) = match e {
                    StoreError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
                    StoreError::InvalidPattern(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_pattern"),
                    StoreError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "store_io"),
                };
                (status, ErrorDetail { code: code.into(), message: e.to_string(), details: None })
            }
            ApiError::Internal(message) => (
                StatusCode::INTERNAL_SERVER_ERROR,
                ErrorDetail { code: "internal".into(), message: message.clone(), details: None },
            ),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Json(_) | Error::Format(_) => ApiError::BadRequest(e),
            Error::Io(_) => ApiError::Internal(e.to_string()),
            _ => ApiError::Domain(e),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::Store(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error) = self.parts();
        (status, json_body(&ErrorResponse { error })).into_response()
    }
}

fn json_body<T: Serialize>(body: &T) -> ([(header::HeaderName, &'static str); 1], String) {
    ([(header::CONTENT_TYPE, "application/json")], api::to_json(body))
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let text = std::str::from_utf8(body).map_err(|e| ApiError::BadRequest(Error::Format(e.to_string())))?;
    from_document_json(text).map_err(ApiError::BadRequest)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))
}

fn record(state: &AppState, session: Option<&str>, kind: &str, query: &impl Serialize, result: &impl Serialize) -> Result<(), ApiError> {
    if let Some(id) = session {
        let query = serde_json::to_value(query).map_err(|e| ApiError::Internal(e.to_string()))?;
        let result = serde_json::to_value(result).map_err(|e| ApiError::Internal(e.to_string()))?;
        state.store.append(id, kind, query, result)?;
    }
    Ok(())
}

async fn default_config() -> impl IntoResponse {
    json_body(&SkeletonConfig::default())
}

async fn solve(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: SolveRequest = parse(&body)?;
    if let Some(id) = &request.session_id {
        state.store.get(id)?;
    }
    let req = request.clone();
    let response = blocking(move || api::solve(&req)).await??;
    record(&state, request.session_id.as_deref(), "solve", &request, &response)?;
    Ok(json_body(&response).into_response())
}

async fn design(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: DesignRequest = parse(&body)?;
    if let Some(id) = &request.session_id {
        state.store.get(id)?;
    }
    let req = request.clone();
    let response = blocking(move || api::design(&req)).await??;
    record(&state, request.session_id.as_deref(), "design", &request, &response)?;
    Ok(json_body(&response).into_response())
}

/// Outcome of a streamed sweep, for callers that watch the worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOutcome {
    pub rows_sent: usize,
    pub cancelled: bool,
}

/// Runs a sweep on a blocking worker, sending each event as it is solved.
/// Dropping the receiver cancels the sweep at its next step.
pub fn spawn_sweep(
    problem: EquilibriumProblem,
    contraction_max: f64,
    step: f64,
) -> (mpsc::Receiver<SweepEvent>, JoinHandle<SweepOutcome>) {
    let (tx, rx) = mpsc::channel(SWEEP_BUFFER);
    let handle = tokio::task::spawn_blocking(move || {
        let mut outcome = SweepOutcome { rows_sent: 0, cancelled: false };
        let result = sweep_contraction_each(&problem, contraction_max, step, |s| {
            if tx.blocking_send(SweepEvent::Row(SweepRow::from(s))).is_err() {
                outcome.cancelled = true;
                return false;
            }
            outcome.rows_sent += 1;
            true
        });
        let last = match result {
            Ok(Some(stop)) => Some(SweepEvent::Stopped(stop)),
            Ok(None) => None,
            Err(e) => Some(SweepEvent::Error(ErrorDetail::from(&e))),
        };
        if let Some(event) = last {
            outcome.cancelled |= tx.blocking_send(event).is_err();
        }
        outcome
    });
    (rx, handle)
}

async fn sweep(body: Bytes) -> Result<Response, ApiError> {
    let request: SweepRequest = parse(&body)?;
    let problem = request.problem()?;
    let (mut rx, _worker) = spawn_sweep(problem, request.contraction_max, request.step);
    // Errors found before the first row (bad step, centered threading, ...)
    // get a plain error response instead of a stream.
    let first = rx.recv().await.ok_or_else(|| ApiError::Internal("sweep worker exited".into()))?;
    if let SweepEvent::Error(detail) = &first {
        return Ok((StatusCode::UNPROCESSABLE_ENTITY, json_body(&ErrorResponse { error: detail.clone() })).into_response());
    }
    let rest = futures::stream::unfold(rx, |mut rx| async move { rx.recv().await.map(|e| (e, rx)) });
    let lines = futures::stream::once(async move { first })
        .chain(rest)
        .map(|event| Ok::<_, Infallible>(Bytes::from(api::to_json(&event) + "\n")));
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], Body::from_stream(lines)).into_response())
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    #[serde(default)]
    config: Option<SkeletonConfig>,
    #[serde(default)]
    name: Option<String>,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: CreateSession = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession { config: None, name: None }
    } else {
        parse(&body)?
    };
    let config = request.config.unwrap_or_default();
    config.validate()?;
    let session = state.store.create(config, request.name)?;
    Ok((StatusCode::CREATED, json_body(&session)).into_response())
}

#[derive(Serialize)]
struct SessionList {
    sessions: Vec<crate::store::SessionSummary>,
}

async fn list_sessions(State(state): State<AppState>) -> impl IntoResponse {
    json_body(&SessionList { sessions: state.store.list() })
}

async fn get_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    Ok(json_body(&state.store.get(&id)?).into_response())
}

#[derive(Debug, Deserialize)]
struct AppendHistory {
    kind: String,
    query: Value,
    result: Value,
}

async fn append_history(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let request: AppendHistory = parse(&body)?;
    let record = state.store.append(&id, &request.kind, request.query, request.result)?;
    Ok((StatusCode::CREATED, json_body(&record)).into_response())
}

#[derive(Debug, Deserialize)]
struct SavePattern {
    name: String,
    #[serde(flatten)]
    pattern: PatternDocument,
}

async fn save_pattern(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let request: SavePattern = parse(&body)?;
    let session = state.store.save_pattern(&id, &request.name, request.pattern.offsets)?;
    Ok(json_body(&session).into_response())
}

/// Serves `router` on `addr` until Ctrl-C.
pub async fn serve(router: Router, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
