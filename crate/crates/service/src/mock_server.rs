//! The mock author behind the wire protocol, for integration runs.

use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use hitloop_core::orchestrator::adapter::{GenerateRequest, GenerateResponse};
use hitloop_core::sim::MockAuthor;

/// Largest `n_chunks` a single request may ask for.
pub const MAX_CHUNKS_PER_REQUEST: usize = 1024;

pub fn router(author: Arc<MockAuthor>) -> Router {
    Router::new()
        .route("/generate", post(generate))
        .route("/health", get(|| async { "ok" }))
        .with_state(author)
}

async fn generate(
    State(author): State<Arc<MockAuthor>>,
    Json(request): Json<GenerateRequest>,
) -> Result<Json<GenerateResponse>, (StatusCode, String)> {
    if request.n_chunks > MAX_CHUNKS_PER_REQUEST {
        return Err((StatusCode::BAD_REQUEST, format!("n_chunks above {MAX_CHUNKS_PER_REQUEST}")));
    }
    let chunks = author.generate_chunks(&request.condition, request.n_chunks);
    Ok(Json(GenerateResponse { chunks }))
}
