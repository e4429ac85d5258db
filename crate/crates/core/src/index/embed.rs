//! Unit-vector embeddings and the providers that produce them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Default dimension of the reference embedder.
pub const DEFAULT_DIM: usize = 256;

/// A unit-normalized vector, or the all-zero vector for text with no tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f32>);

impl Embedding {
    /// L2-normalizes `raw`. An all-zero input stays all-zero.
    pub fn normalized(raw: Vec<f32>) -> Self {
        let norm = raw.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Embedding(raw);
        }
        Embedding(raw.into_iter().map(|x| (f64::from(x) / norm) as f32).collect())
    }

    /// Wraps values that are already unit-normalized (e.g. read back from disk).
    pub fn from_unit_values(values: Vec<f32>) -> Self {
        Embedding(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Embedding(vec![0.0; dim])
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding provider failed: {0}")]
    Provider(String),
}

/// Something that turns text into a fixed-dimension embedding.
pub trait EmbeddingProvider: Send + Sync {
    /// Stable identifier persisted with an index so queries use the same provider.
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError>;
}

/// Dot product of two embeddings clamped to [-1, 1]; 0 when either side is
/// the zero vector.
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if a.is_zero() || b.is_zero() {
        return Ok(0.0);
    }
    let mut dot = 0.0f64;
    for (x, y) in a.values().iter().zip(b.values()) {
        dot += f64::from(*x) * f64::from(*y);
    }
    Ok(dot.clamp(-1.0, 1.0))
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// 64-bit FNV-1a; stable across platforms and releases.
fn fnv1a(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Hashed sublinear term-frequency embedder. Deterministic and needs no
/// model weights.
#[derive(Debug, Clone)]
pub struct ReferenceEmbedder {
    dim: usize,
}

impl ReferenceEmbedder {
    pub const NAME: &'static str = "ref";

    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        ReferenceEmbedder { dim }
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(token.as_bytes()) % self.dim as u64) as usize
    }
}

impl Default for ReferenceEmbedder {
    fn default() -> Self {
        ReferenceEmbedder::new(DEFAULT_DIM)
    }
}

impl EmbeddingProvider for ReferenceEmbedder {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        // BTreeMap keeps accumulation order, and so the float bits, fixed.
        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for token in tokenize(text) {
            *tf.entry(token).or_default() += 1;
        }
        let mut raw = vec![0.0f64; self.dim];
        for (token, count) in &tf {
            raw[self.bucket(token)] += 1.0 + f64::from(*count).ln();
        }
        Ok(Embedding::normalized(raw.into_iter().map(|x| x as f32).collect()))
    }
}
