//! HTTP client side of the author wire protocol.

use std::path::Path;
use std::time::Duration;

use anyhow::Context;
use hitloop_core::orchestrator::adapter::{
    AdapterError, AuthorAdapter, GenerateRequest, GenerateResponse,
};
use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};

fn default_timeout() -> u64 {
    120
}

fn default_retries() -> u32 {
    2
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorClientConfig {
    /// Base URL of the author service; `/generate` is appended.
    pub url: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Extra attempts after a timeout, connection failure or 5xx answer.
    #[serde(default = "default_retries")]
    pub retries: u32,
}

impl AuthorClientConfig {
    pub fn new(url: impl Into<String>) -> Self {
        AuthorClientConfig { url: url.into(), timeout_secs: default_timeout(), retries: default_retries() }
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Must be created and dropped outside any async runtime.
pub struct HttpAuthor {
    client: Client,
    endpoint: String,
    retries: u32,
}

impl HttpAuthor {
    pub fn new(config: &AuthorClientConfig) -> anyhow::Result<Self> {
        let client = Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .context("building HTTP client")?;
        let endpoint = format!("{}/generate", config.url.trim_end_matches('/'));
        Ok(HttpAuthor { client, endpoint, retries: config.retries })
    }

    fn attempt(&self, request: &GenerateRequest) -> Result<GenerateResponse, (AdapterError, bool)> {
        let response = self.client.post(&self.endpoint).json(request).send().map_err(|e| {
            if e.is_timeout() {
                (AdapterError::Timeout, true)
            } else {
                (AdapterError::Transport(e.to_string()), true)
            }
        })?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            let retry = status.is_server_error();
            return Err((AdapterError::Protocol(format!("HTTP {status}: {body}")), retry));
        }
        let text = response.text().map_err(|e| (AdapterError::Transport(e.to_string()), true))?;
        serde_json::from_str(&text).map_err(|e| (AdapterError::Protocol(format!("bad response body: {e}")), false))
    }
}

impl AuthorAdapter for HttpAuthor {
    fn generate(&self, request: &GenerateRequest) -> Result<GenerateResponse, AdapterError> {
        let mut attempt = 0;
        loop {
            match self.attempt(request) {
                Ok(r) => return Ok(r),
                Err((e, retry)) if retry && attempt < self.retries => {
                    log::warn!("author attempt {} failed: {e}; retrying", attempt + 1);
                    attempt += 1;
                }
                Err((e, _)) => return Err(e),
            }
        }
    }
}

/// Stand-in used when no author is configured.
pub struct NoAuthor;

impl AuthorAdapter for NoAuthor {
    fn generate(&self, _: &GenerateRequest) -> Result<GenerateResponse, AdapterError> {
        Err(AdapterError::Transport("no author configured".into()))
    }
}
