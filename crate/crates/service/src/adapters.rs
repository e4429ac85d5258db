//! HTTP adapters for an external generation backend and an external
//! embedding provider.
//!
//! Generation: `POST {system_directive, user_text, context_texts}` returns
//! `{body}`. Embedding: `POST {input}` returns `{embedding: [f32]}`. Both
//! send the credential as a bearer token.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use coursemate_core::index::{EmbedError, Embedding, EmbeddingProvider};
use coursemate_core::rag::{
    BackendError, BackendKind, GenerationBackend, GenerationRequest, GenerationResponse,
};

/// Name persisted in index metadata for indexes built with [`HttpEmbeddingProvider`].
pub const HTTP_PROVIDER_NAME: &str = "http";

fn agent(timeout_ms: u64) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(timeout_ms)))
        .http_status_as_error(false)
        .build()
        .into()
}

#[derive(Debug)]
enum CallError {
    Timeout,
    Other(String),
}

fn post_json<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
    agent: &ureq::Agent,
    url: &str,
    api_key: &str,
    body: &Req,
) -> Result<Resp, CallError> {
    let mut resp = agent
        .post(url)
        .header("Authorization", &format!("Bearer {api_key}"))
        .send_json(body)
        .map_err(|e| match e {
            ureq::Error::Timeout(_) => CallError::Timeout,
            other => CallError::Other(other.to_string()),
        })?;
    let status = resp.status();
    if !status.is_success() {
        let text = resp.body_mut().read_to_string().unwrap_or_default();
        let snippet: String = text.chars().take(200).collect();
        return Err(CallError::Other(format!("HTTP {}: {snippet}", status.as_u16())));
    }
    resp.body_mut().read_json::<Resp>().map_err(|e| match e {
        ureq::Error::Timeout(_) => CallError::Timeout,
        other => CallError::Other(format!("invalid response body: {other}")),
    })
}

pub struct ExternalBackend {
    agent: ureq::Agent,
    endpoint: String,
    api_key: String,
    timeout_ms: u64,
}

impl ExternalBackend {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, timeout_ms: u64) -> Self {
        ExternalBackend {
            agent: agent(timeout_ms),
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            timeout_ms,
        }
    }
}

impl GenerationBackend for ExternalBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::External
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, BackendError> {
        post_json(&self.agent, &self.endpoint, &self.api_key, request).map_err(|e| match e {
            CallError::Timeout => BackendError::Timeout {
                after_ms: self.timeout_ms,
            },
            CallError::Other(msg) => BackendError::Failed(format!("{}: {msg}", self.endpoint)),
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub input: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embedding: Vec<f32>,
}

pub struct HttpEmbeddingProvider {
    agent: ureq::Agent,
    endpoint: String,
    api_key: String,
    dim: usize,
}

impl HttpEmbeddingProvider {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, dim: usize, timeout_ms: u64) -> Self {
        HttpEmbeddingProvider {
            agent: agent(timeout_ms),
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            dim,
        }
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn name(&self) -> &str {
        HTTP_PROVIDER_NAME
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let req = EmbedRequest { input: text.to_string() };
        let resp: EmbedResponse = post_json(&self.agent, &self.endpoint, &self.api_key, &req)
            .map_err(|e| match e {
                CallError::Timeout => EmbedError::Provider(format!("{} timed out", self.endpoint)),
                CallError::Other(msg) => EmbedError::Provider(msg),
            })?;
        if resp.embedding.len() != self.dim {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dim,
                got: resp.embedding.len(),
            });
        }
        Ok(Embedding::normalized(resp.embedding))
    }
}
