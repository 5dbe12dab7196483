//! Author wire protocol: `POST /generate`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub condition: String,
    pub n_chunks: usize,
    pub max_tokens: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub chunks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdapterError {
    #[error("author timed out")]
    Timeout,
    #[error("author unreachable: {0}")]
    Transport(String),
    #[error("author protocol error: {0}")]
    Protocol(String),
}

/// Anything that can produce chunks for a condition.
pub trait AuthorAdapter: Send + Sync {
    fn generate(&self, request: &GenerateRequest) -> Result<GenerateResponse, AdapterError>;
}

impl<F> AuthorAdapter for F
where
    F: Fn(&GenerateRequest) -> Result<GenerateResponse, AdapterError> + Send + Sync,
{
    fn generate(&self, request: &GenerateRequest) -> Result<GenerateResponse, AdapterError> {
        self(request)
    }
}

/// Checks a response against the request it answers.
pub fn check_response(request: &GenerateRequest, response: &GenerateResponse) -> Result<(), AdapterError> {
    if response.chunks.len() != request.n_chunks {
        return Err(AdapterError::Protocol(format!(
            "asked for {} chunks, got {}",
            request.n_chunks,
            response.chunks.len()
        )));
    }
    Ok(())
}
