//! Service configuration, read from a flat TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use coursemate_core::rag::BackendKind;

/// Environment variable holding the external generation backend credential.
pub const LLM_KEY_ENV: &str = "COURSEMATE_LLM_API_KEY";
/// Environment variable with the generation endpoint, used when the config
/// file leaves `external_endpoint` unset.
pub const LLM_ENDPOINT_ENV: &str = "COURSEMATE_LLM_ENDPOINT";
pub const EMBED_KEY_ENV: &str = "COURSEMATE_EMBED_API_KEY";
pub const EMBED_ENDPOINT_ENV: &str = "COURSEMATE_EMBED_ENDPOINT";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

fn default_timeout() -> u64 {
    30_000
}

fn default_concurrency() -> usize {
    4
}

fn default_attempts() -> u32 {
    3
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen_address: String,
    pub index_dir: PathBuf,
    pub data_dir: PathBuf,
    #[serde(default = "default_backend")]
    pub backend: BackendKind,
    #[serde(default)]
    pub external_endpoint: Option<String>,
    #[serde(default = "default_timeout")]
    pub request_timeout_ms: u64,
    #[serde(default = "default_concurrency")]
    pub ai_answer_concurrency: usize,
    /// Attempts per AI answer before the question is left for the next start.
    #[serde(default = "default_attempts")]
    pub ai_answer_attempts: u32,
    /// JSON file mapping bearer tokens to users.
    #[serde(default)]
    pub tokens_file: Option<PathBuf>,
    /// Call fsync after every log append.
    #[serde(default = "default_true")]
    pub durable_log: bool,
}

fn default_backend() -> BackendKind {
    BackendKind::Stub
}

impl ServiceConfig {
    /// A stub-backed config with every default, for tests and local runs.
    pub fn new(index_dir: impl Into<PathBuf>, data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            listen_address: default_listen(),
            index_dir: index_dir.into(),
            data_dir: data_dir.into(),
            backend: BackendKind::Stub,
            external_endpoint: None,
            request_timeout_ms: default_timeout(),
            ai_answer_concurrency: default_concurrency(),
            ai_answer_attempts: default_attempts(),
            tokens_file: None,
            durable_log: true,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: ServiceConfig = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        // relative paths are taken from the config file's directory
        if let Some(base) = path.parent() {
            for p in [&mut config.index_dir, &mut config.data_dir] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
            if let Some(t) = config.tokens_file.as_mut().filter(|t| t.is_relative()) {
                *t = base.join(&*t);
            }
        }
        Ok(config)
    }

    /// Checks the invariants that do not need the filesystem.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ai_answer_concurrency == 0 {
            return Err(ConfigError::Invalid("ai_answer_concurrency must be at least 1".into()));
        }
        if self.ai_answer_attempts == 0 {
            return Err(ConfigError::Invalid("ai_answer_attempts must be at least 1".into()));
        }
        if self.request_timeout_ms == 0 {
            return Err(ConfigError::Invalid("request_timeout_ms must be positive".into()));
        }
        if self.backend == BackendKind::External {
            self.external_endpoint()?;
            credential(LLM_KEY_ENV)?;
        }
        Ok(())
    }

    /// Endpoint for the external backend: the config value, else the
    /// environment.
    pub fn external_endpoint(&self) -> Result<String, ConfigError> {
        self.external_endpoint
            .clone()
            .or_else(|| std::env::var(LLM_ENDPOINT_ENV).ok())
            .filter(|e| !e.trim().is_empty())
            .ok_or_else(|| {
                ConfigError::Invalid(format!(
                    "backend \"external\" needs external_endpoint or {LLM_ENDPOINT_ENV}"
                ))
            })
    }
}

/// Reads a non-empty credential from the environment.
pub fn credential(var: &str) -> Result<String, ConfigError> {
    std::env::var(var)
        .ok()
        .filter(|v| !v.trim().is_empty())
        .ok_or_else(|| ConfigError::Invalid(format!("{var} is not set")))
}
