//! HTTP JSON API over the orchestrator.
//!
//! Orchestrator calls block (store I/O, author requests), so every handler
//! runs its work on the blocking pool.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hitloop_core::grammar::ExportFormat;
use hitloop_core::label::TargetLabel;
use hitloop_core::metrics::MetricError;
use hitloop_core::orchestrator::{Orchestrator, OrchestratorError};
use hitloop_core::record::{ReviewDecision, Verdict};
use hitloop_core::store::StoreError;
use serde::Deserialize;
use serde_json::json;

use crate::LoopRequest;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, kind, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.kind, "message": self.message }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        use StoreError::*;
        let (status, kind) = match &e {
            UnknownVersion(_) | UnknownPair(_) => (StatusCode::NOT_FOUND, "not_found"),
            Malformed { .. } | InvalidRecord { .. } | Invariant(_) | ZeroQuota => {
                (StatusCode::UNPROCESSABLE_ENTITY, "invalid")
            }
            VersionExists(_) | DuplicatePair(_) | Frozen(_) | NotFrozen(_) | AlreadyReviewed(_)
            | QuotaNotMet { .. } | PendingRecords { .. } => (StatusCode::CONFLICT, "conflict"),
            Io(_) | CorruptLog { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, kind, e.to_string())
    }
}

impl From<OrchestratorError> for ApiError {
    fn from(e: OrchestratorError) -> Self {
        use OrchestratorError::*;
        let e = match e {
            Store(inner) => return inner.into(),
            other => other,
        };
        let (status, kind) = match &e {
            Store(_) => unreachable!("handled above"),
            Metric(MetricError::NotFrozen(_)) => (StatusCode::CONFLICT, "conflict"),
            Metric(_) => (StatusCode::UNPROCESSABLE_ENTITY, "metric"),
            Invalid(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid"),
            InvalidConfig(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            NotOpenLoop(_) => (StatusCode::NOT_FOUND, "not_found"),
            StaleLease { .. } => (StatusCode::CONFLICT, "stale_lease"),
            OpenPriorLoop(_) | QuotaReached(_) | TargetQuotaReached { .. } | QuotaUnmet { .. } => {
                (StatusCode::CONFLICT, "conflict")
            }
        };
        ApiError::new(status, kind, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

type AppState = Arc<Orchestrator>;

pub fn router(orchestrator: Arc<Orchestrator>) -> Router {
    Router::new()
        .route("/loops", post(start_loop))
        .route("/loops/{id}/generate", post(generate))
        .route("/loops/{id}/close", post(close_loop))
        .route("/review/next", get(next_for_review))
        .route("/review/{pair_id}", post(submit_review))
        .route("/versions", get(list_versions))
        .route("/versions/{name}", get(get_version))
        .route("/versions/{name}/report", get(report))
        .route("/versions/{name}/export", get(export))
        .with_state(orchestrator)
}

async fn start_loop(State(o): State<AppState>, Json(req): Json<LoopRequest>) -> ApiResult<impl IntoResponse> {
    let config = req.config().map_err(|e| ApiError::bad_request(e.to_string()))?;
    let handle = blocking(move || Ok(o.start_loop(&req.name, config, req.base.as_deref())?)).await?;
    Ok((StatusCode::CREATED, Json(handle)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateBody {
    n_chunks: usize,
}

async fn generate(
    State(o): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<GenerateBody>,
) -> ApiResult<impl IntoResponse> {
    if body.n_chunks == 0 {
        return Err(ApiError::bad_request("n_chunks must be positive"));
    }
    let chunks = blocking(move || Ok(o.request_generation(&id, body.n_chunks)?)).await?;
    Ok(Json(json!({ "chunks": chunks })))
}

async fn close_loop(State(o): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let (version, report) = blocking(move || Ok(o.close_loop(&id)?)).await?;
    Ok(Json(json!({ "version": version, "report": report })))
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: String,
    #[serde(rename = "loop")]
    only_loop: Option<String>,
}

async fn next_for_review(State(o): State<AppState>, Query(q): Query<NextQuery>) -> ApiResult<Response> {
    let next = blocking(move || Ok(o.next_for_review(&q.annotator, q.only_loop.as_deref())?)).await?;
    Ok(match next {
        Some(assignment) => Json(assignment).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

/// A reviewer verdict; the pair id comes from the path.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReviewBody {
    verdict: Verdict,
    #[serde(default)]
    hs_edited: Option<String>,
    #[serde(default)]
    cn_edited: Option<String>,
    #[serde(default)]
    target: Option<TargetLabel>,
    annotator: String,
    #[serde(default)]
    elapsed_seconds: Option<f64>,
    #[serde(default)]
    pair_id: Option<String>,
}

async fn submit_review(
    State(o): State<AppState>,
    Path(pair_id): Path<String>,
    Json(body): Json<ReviewBody>,
) -> ApiResult<impl IntoResponse> {
    if body.pair_id.as_ref().is_some_and(|p| *p != pair_id) {
        return Err(ApiError::bad_request("pair_id in body does not match the path"));
    }
    let decision = ReviewDecision {
        pair_id,
        verdict: body.verdict,
        hs_edited: body.hs_edited,
        cn_edited: body.cn_edited,
        target: body.target,
        annotator: Some(body.annotator),
        elapsed_seconds: body.elapsed_seconds,
        note: None,
    };
    let record = blocking(move || Ok(o.submit_review(decision)?)).await?;
    Ok(Json(record))
}

async fn list_versions(State(o): State<AppState>) -> ApiResult<impl IntoResponse> {
    let versions = blocking(move || Ok(o.store().versions())).await?;
    Ok(Json(versions))
}

async fn get_version(State(o): State<AppState>, Path(name): Path<String>) -> ApiResult<impl IntoResponse> {
    let version = blocking(move || Ok(o.store().get_version(&name)?)).await?;
    Ok(Json(version))
}

async fn report(State(o): State<AppState>, Path(name): Path<String>) -> ApiResult<impl IntoResponse> {
    let json = blocking(move || Ok(o.report_json(&name)?)).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], json))
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(
    State(o): State<AppState>,
    Path(name): Path<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<impl IntoResponse> {
    let format: ExportFormat = q
        .format
        .as_deref()
        .unwrap_or("plain")
        .parse()
        .map_err(ApiError::bad_request)?;
    let body = blocking(move || {
        let mut out = Vec::new();
        o.store().export_training(&name, format, &mut out)?;
        Ok(out)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], body))
}
