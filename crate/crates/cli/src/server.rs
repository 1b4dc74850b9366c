//! Local JSON service that the review UI talks to.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use emx_core::dataflow::{build_cfg, liveness};
use emx_core::extractor::{apply, plan};
use emx_core::pipeline::{run, GroupPreview, PipelineOptions, TrailEntry};
use emx_core::source::{locate_method, LineRange, MethodLocator};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::commands::{load_unit, pipeline_options, write_atomically, CliError, ProviderHandle};
use crate::config::AppConfig;

/// A frozen result of `/suggest`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuggestSession {
    pub id: Uuid,
    /// As given in the request.
    pub path: String,
    pub digest: String,
    pub method: String,
    pub method_lines: LineRange,
    pub groups: Vec<GroupPreview>,
    pub trail: Vec<TrailEntry>,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum LocatorField {
    Line(u32),
    Text(String),
}

impl From<LocatorField> for MethodLocator {
    fn from(f: LocatorField) -> Self {
        match f {
            LocatorField::Line(l) => MethodLocator::Line(l),
            LocatorField::Text(s) => s.parse().unwrap_or_else(|e| match e {}),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuggestBody {
    pub path: String,
    pub method_locator: LocatorField,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplyBody {
    pub session_id: Uuid,
    /// Zero-based index into the session's groups.
    pub group: usize,
    /// Leave the file untouched and only return the result when false.
    #[serde(default = "yes")]
    pub write: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ApplyResponse {
    pub diff: String,
    pub new_text: String,
    pub new_method_line: u32,
    pub written: bool,
}

#[derive(Debug, Deserialize)]
pub struct SourceQuery {
    pub path: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SourceResponse {
    pub path: String,
    pub digest: String,
    pub text: String,
}

/// Error body: `{"error": code, "message": text}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }
}

impl From<CliError> for ApiError {
    fn from(e: CliError) -> Self {
        let (status, code) = match &e {
            CliError::FileNotFound(_) => (StatusCode::NOT_FOUND, "file_not_found"),
            CliError::Parse(_) => (StatusCode::UNPROCESSABLE_ENTITY, "parse_error"),
            CliError::Method(_) => (StatusCode::NOT_FOUND, "method_not_found"),
            CliError::ProviderUnreachable(_) => (StatusCode::BAD_GATEWAY, "provider_unreachable"),
            CliError::InvalidRange(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_range"),
            CliError::StaleUnit => (StatusCode::CONFLICT, "stale_unit"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "malformed_body", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.code, "message": self.message });
        (self.status, Json(body)).into_response()
    }
}

pub struct AppState {
    root: PathBuf,
    options: PipelineOptions,
    provider: ProviderHandle,
    sessions: Mutex<HashMap<Uuid, Arc<SuggestSession>>>,
    write_locks: Mutex<HashMap<PathBuf, Arc<tokio::sync::Mutex<()>>>>,
}

impl AppState {
    pub fn new(cfg: &AppConfig, root: &Path) -> Result<Self, CliError> {
        let root = root.canonicalize().map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(AppState {
            root,
            options: pipeline_options(cfg)?,
            provider: ProviderHandle::from_config(cfg)?,
            sessions: Mutex::new(HashMap::new()),
            write_locks: Mutex::new(HashMap::new()),
        })
    }

    /// Resolve a request path against the root, refusing anything outside it.
    fn confine(&self, path: &str) -> Result<PathBuf, ApiError> {
        let joined = self.root.join(path);
        let real = joined.canonicalize().map_err(|_| ApiError::new(StatusCode::NOT_FOUND, "file_not_found", path))?;
        if !real.starts_with(&self.root) {
            return Err(ApiError::new(StatusCode::FORBIDDEN, "outside_root", format!("{path} is outside the project root")));
        }
        Ok(real)
    }

    fn session(&self, id: Uuid) -> Result<Arc<SuggestSession>, ApiError> {
        self.sessions
            .lock()
            .unwrap()
            .get(&id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id}")))
    }

    fn write_lock(&self, path: &Path) -> Arc<tokio::sync::Mutex<()>> {
        self.write_locks.lock().unwrap().entry(path.to_owned()).or_default().clone()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/suggest", post(suggest))
        .route("/session/{id}", get(session))
        .route("/apply", post(apply_group))
        .route("/source", get(source))
        .with_state(state)
}

async fn health() -> &'static str {
    "ok"
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn suggest(
    State(state): State<Arc<AppState>>,
    body: Result<Json<SuggestBody>, JsonRejection>,
) -> Result<Json<SuggestSession>, ApiError> {
    let Json(body) = body?;
    let path = state.confine(&body.path)?;
    let locator = MethodLocator::from(body.method_locator);
    let st = state.clone();
    let session = blocking(move || {
        let unit = load_unit(&path)?;
        let model = locate_method(&unit, &locator).map_err(CliError::from)?;
        let out = run(&model, st.provider.provider(), &st.options).map_err(CliError::from)?;
        st.provider.finish()?;
        Ok(SuggestSession {
            id: Uuid::new_v4(),
            path: body.path,
            digest: out.unit_digest,
            method: out.method,
            method_lines: out.method_lines,
            groups: out.groups,
            trail: out.trail,
            created_at: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        })
    })
    .await?;
    let session = Arc::new(session);
    log::info!("session {} for {} ({} groups)", session.id, session.method, session.groups.len());
    state.sessions.lock().unwrap().insert(session.id, session.clone());
    Ok(Json((*session).clone()))
}

async fn session(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SuggestSession>, ApiError> {
    let id = Uuid::parse_str(&id)
        .map_err(|_| ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id}")))?;
    Ok(Json((*state.session(id)?).clone()))
}

async fn apply_group(
    State(state): State<Arc<AppState>>,
    body: Result<Json<ApplyBody>, JsonRejection>,
) -> Result<Json<ApplyResponse>, ApiError> {
    let Json(body) = body?;
    let session = state.session(body.session_id)?;
    let Some(preview) = session.groups.get(body.group).cloned() else {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_range",
            format!("session has {} group(s), no index {}", session.groups.len(), body.group),
        ));
    };
    let path = state.confine(&session.path)?;
    let lock = state.write_lock(&path);
    let _guard = lock.lock().await;
    let write = body.write;
    blocking(move || {
        let unit = load_unit(&path)?;
        if unit.digest() != session.digest {
            return Err(CliError::StaleUnit.into());
        }
        let model = locate_method(&unit, &MethodLocator::Line(session.method_lines.start)).map_err(CliError::from)?;
        let cfg = build_cfg(&model);
        let live = liveness(&model, &cfg);
        let g = &preview.group;
        let p = plan(&model, &cfg, &live, &g.fragment, &g.representative_name)
            .map_err(|e| CliError::InvalidRange(e.to_string()))?;
        let applied = apply(&unit, &p).map_err(CliError::from)?;
        if write {
            write_atomically(&path, &applied.new_text)?;
            log::info!("extracted {} into {}", g.representative_name, session.path);
        }
        Ok(Json(ApplyResponse {
            diff: applied.script.diff,
            new_text: applied.new_text,
            new_method_line: applied.new_method_line,
            written: write,
        }))
    })
    .await
}

async fn source(
    State(state): State<Arc<AppState>>,
    query: Result<Query<SourceQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<Json<SourceResponse>, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed_query", e.body_text()))?;
    let path = state.confine(&q.path)?;
    let text = tokio::fs::read_to_string(&path).await.map_err(|e| CliError::Io(e.to_string()))?;
    Ok(Json(SourceResponse { path: q.path, digest: emx_core::source::digest_text(&text), text }))
}

/// Bind and serve until Ctrl-C.
pub async fn serve(state: Arc<AppState>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
