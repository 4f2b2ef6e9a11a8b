//! Embedding vectors, cosine similarity and embedding providers.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default dimension of the hashing provider.
pub const DEFAULT_HASH_DIMENSION: usize = 256;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("invalid embedding: {0}")]
    Invalid(String),
    #[error("embedding provider {provider} failed: {message}")]
    ProviderFailure { provider: String, message: String },
}

/// A finite, non-empty real vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::Invalid("dimension must be positive".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::Invalid(format!("component {i} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn zeros(dimension: usize) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        Self {
            values: vec![0.0; dimension],
        }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Multiply every component by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self, EmbeddingError> {
        Self::new(self.values.iter().map(|v| v * k).collect())
    }
}

/// Cosine of the angle between `a` and `b`, clamped to [-1, 1].
///
/// The two arguments are treated identically, so swapping them gives the
/// bit-identical result.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dimension() != b.dimension() {
        return Err(EmbeddingError::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    let (norm_a, norm_b) = (a.norm(), b.norm());
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (norm_a * norm_b)).clamp(-1.0, 1.0))
}

/// Source of sentence embeddings. Implementations must be deterministic per
/// version and safe to call from several threads.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError>;
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Lowercased tokens between Unicode non-alphanumeric characters.
pub fn hash_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Unnormalized signed feature-hash counts.
pub fn hash_embed_raw(text: &str, dimension: usize) -> Vec<f64> {
    assert!(dimension >= 2, "hash_embed needs dimension >= 2");
    let mut values = vec![0.0; dimension];
    for token in hash_tokens(text) {
        let h = fnv1a64(token.as_bytes());
        let bucket = (h % dimension as u64) as usize;
        let sign = if (h >> 8) & 1 == 0 { 1.0 } else { -1.0 };
        values[bucket] += sign;
    }
    values
}

/// Signed feature hashing into `dimension` buckets, L2-normalized. Text
/// without tokens yields the zero vector.
pub fn hash_embed(text: &str, dimension: usize) -> EmbeddingVector {
    let mut values = hash_embed_raw(text, dimension);
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        values.iter_mut().for_each(|v| *v /= norm);
    }
    EmbeddingVector { values }
}

/// Deterministic provider backed by [`hash_embed`]; needs no model.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Result<Self, EmbeddingError> {
        if dimension < 2 {
            return Err(EmbeddingError::Invalid(format!(
                "hash embedder dimension must be >= 2, got {dimension}"
            )));
        }
        Ok(Self { dimension })
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self {
            dimension: DEFAULT_HASH_DIMENSION,
        }
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn name(&self) -> &str {
        "hash-fnv1a64-v1"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        Ok(hash_embed(text, self.dimension))
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embedding: Vec<f64>,
}

/// Provider calling an HTTP endpoint: POST `{model, text}` returning
/// `{embedding: [..]}`.
pub struct RemoteEmbedder {
    url: String,
    model: String,
    dimension: usize,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(
        url: impl Into<String>,
        model: impl Into<String>,
        dimension: usize,
        timeout: Duration,
    ) -> Result<Self, EmbeddingError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EmbeddingError::Invalid(e.to_string()))?;
        Ok(Self {
            url: url.into(),
            model: model.into(),
            dimension,
            client,
        })
    }

    fn failure(&self, message: impl ToString) -> EmbeddingError {
        EmbeddingError::ProviderFailure {
            provider: self.url.clone(),
            message: message.to_string(),
        }
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn name(&self) -> &str {
        &self.model
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let body = EmbedRequest {
            model: &self.model,
            text,
        };
        let resp = self
            .client
            .post(&self.url)
            .json(&body)
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| self.failure(e))?;
        let parsed: EmbedResponse = resp.json().map_err(|e| self.failure(e))?;
        if parsed.embedding.len() != self.dimension {
            return Err(self.failure(format!(
                "expected {} components, got {}",
                self.dimension,
                parsed.embedding.len()
            )));
        }
        EmbeddingVector::new(parsed.embedding).map_err(|e| self.failure(e))
    }
}
