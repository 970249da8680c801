//! HTTP front end for the triage store.
//!
//! | method | path          | body / query                              |
//! |--------|---------------|-------------------------------------------|
//! | GET    | `/candidates` | `?status=pending&limit=N`                 |
//! | POST   | `/decisions`  | `{item_id, verdict, segments?, reviewer?}`|
//! | GET    | `/progress`   |                                           |
//! | GET    | `/export`     | `?lang=en`                                |
//!
//! Errors come back as `{"error": "..."}` with 404 for unknown items,
//! 409 for items that are no longer pending and 422 for invalid input.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use policywatch::triage::{
    LabeledCorpus, Progress, SegmentSpec, TriageError, TriageItem, TriageStatus, TriageStore, Verdict,
};

pub type SharedStore = Arc<Mutex<TriageStore>>;

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }
}

impl From<TriageError> for ApiError {
    fn from(e: TriageError) -> Self {
        let status = match &e {
            TriageError::NotFound(_) => StatusCode::NOT_FOUND,
            TriageError::Conflict { .. } => StatusCode::CONFLICT,
            TriageError::Validation(_) | TriageError::UnresolvedComment(_) => StatusCode::UNPROCESSABLE_ENTITY,
            TriageError::Log { .. } | TriageError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ListQuery {
    pub status: Option<TriageStatus>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRequest {
    pub item_id: u64,
    pub verdict: Verdict,
    #[serde(default)]
    pub segments: Vec<SegmentSpec>,
    #[serde(default)]
    pub reviewer: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportQuery {
    pub lang: Option<String>,
}

async fn candidates(
    State(store): State<SharedStore>,
    query: Result<Query<ListQuery>, QueryRejection>,
) -> Result<Json<Vec<TriageItem>>, ApiError> {
    let Query(q) = query?;
    let store = store.lock().await;
    Ok(Json(store.list(q.status, q.limit)))
}

async fn decisions(
    State(store): State<SharedStore>,
    body: Result<Json<DecisionRequest>, JsonRejection>,
) -> Result<Json<TriageItem>, ApiError> {
    let Json(req) = body?;
    let mut store = store.lock().await;
    let item = store.decide(req.item_id, req.verdict, req.segments, req.reviewer)?;
    log::info!("item {} -> {}", item.item_id, item.status.as_str());
    Ok(Json(item))
}

async fn progress(State(store): State<SharedStore>) -> Json<Progress> {
    Json(store.lock().await.progress())
}

async fn export(
    State(store): State<SharedStore>,
    query: Result<Query<ExportQuery>, QueryRejection>,
) -> Result<Json<LabeledCorpus>, ApiError> {
    let Query(q) = query?;
    let lang = q.lang.unwrap_or_else(|| "en".to_string());
    Ok(Json(store.lock().await.export_labeled_corpus(&lang)))
}

pub fn router(store: SharedStore) -> Router {
    Router::new()
        .route("/candidates", get(candidates))
        .route("/decisions", post(decisions))
        .route("/progress", get(progress))
        .route("/export", get(export))
        .with_state(store)
}

pub fn shared(store: TriageStore) -> SharedStore {
    Arc::new(Mutex::new(store))
}

/// Binds `addr` and serves until `shutdown` resolves.
pub async fn serve(
    store: SharedStore,
    addr: SocketAddr,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("triage service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store))
        .with_graceful_shutdown(shutdown)
        .await
}
