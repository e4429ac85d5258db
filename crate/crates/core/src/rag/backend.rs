//! Generation backends. The stub is deterministic and needs no network;
//! external adapters implement the same trait.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Stub,
    External,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Stub => "stub",
            BackendKind::External => "external",
        })
    }
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stub" => Ok(BackendKind::Stub),
            "external" => Ok(BackendKind::External),
            other => Err(format!("unknown backend {other:?} (expected stub or external)")),
        }
    }
}

/// Wire request sent to a generation backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub system_directive: String,
    pub user_text: String,
    pub context_texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend timed out after {after_ms} ms")]
    Timeout { after_ms: u64 },
    #[error("backend failed: {0}")]
    Failed(String),
    #[error("backend is not configured: {0}")]
    Misconfigured(String),
}

pub trait GenerationBackend: Send + Sync {
    fn kind(&self) -> BackendKind;

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, BackendError>;
}

/// Text up to and including the first sentence terminator that is followed
/// by whitespace (or the end), or up to the first line break.
pub fn first_sentence(text: &str) -> &str {
    let text = text.trim();
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c == '\n' {
            return text[..i].trim_end();
        }
        if matches!(c, '.' | '!' | '?') {
            let end = i + c.len_utf8();
            match chars.peek() {
                None => return text,
                Some((_, next)) if next.is_whitespace() => return &text[..end],
                _ => {}
            }
        }
    }
    text
}

/// Echoes the first sentence of each context passage as a hint, in rank
/// order.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubBackend;

impl GenerationBackend for StubBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Stub
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, BackendError> {
        let body = request
            .context_texts
            .iter()
            .map(|t| format!("Hint: {}", first_sentence(t)))
            .collect::<Vec<_>>()
            .join("\n");
        Ok(GenerationResponse { body })
    }
}
