//! Embedding providers and cosine similarity.
//!
//! Every provider implements [`Embedder`]: a deterministic feature-hashing
//! embedder, a fitted TF-IDF vectorizer, and an HTTP client for an external
//! `/embed` service. A mock of that service backed by the hashing embedder
//! lives in [`server`], and [`contract`] holds the protocol conformance checks
//! shared by the mock and any real service.

pub mod contract;
mod hashing;
mod remote;
pub mod server;
mod tfidf;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use contract::{run_contract_suite, ContractCheck};
pub use hashing::{fnv1a64, hash_embed, HashEmbedder};
pub use remote::{EmbedRequest, EmbedResponse, RemoteConfig, RemoteEmbedder, EMBED_URL_ENV};
pub use server::{MockEmbedServer, MockServerConfig};
pub use tfidf::{sparse_sq_distance, SparseVector, TfidfVectorizer};

use crate::error::{Error, Result};

pub const MIN_DIM: usize = 8;
pub const DEFAULT_HASH_DIM: usize = 256;

/// Dense embedding vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("embedding has zero dimensions"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding has non-finite values"));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        EmbeddingVector(self.0.iter().map(|v| v * factor).collect())
    }

    /// Unit-norm copy; the zero vector stays zero.
    pub fn normalized(mut self) -> Self {
        let norm = self.norm();
        if norm > 0.0 {
            for v in &mut self.0 {
                *v /= norm;
            }
        }
        self
    }
}

/// Cosine similarity clamped to `[-1, 1]`. A zero vector has similarity 0
/// with everything.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    let nu = u.norm();
    let nv = v.norm();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = u.values().iter().zip(v.values()).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// A text embedding provider.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    /// One vector per input text, in input order.
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>>;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector> {
        self.embed(&[text])?
            .pop()
            .ok_or_else(|| Error::Protocol("embedder returned no vector".into()))
    }
}

/// Serializable description of an embedder, stored alongside trained models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderConfig {
    Hash { dim: usize },
    Tfidf { vectorizer: TfidfVectorizer },
    Remote(RemoteConfig),
}

impl EmbedderConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            EmbedderConfig::Hash { .. } => "hash",
            EmbedderConfig::Tfidf { .. } => "tfidf",
            EmbedderConfig::Remote(_) => "remote",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EmbedderConfig::Hash { dim } if *dim < MIN_DIM => Err(Error::Config(format!(
                "hash embedder dim must be at least {MIN_DIM}, got {dim}"
            ))),
            EmbedderConfig::Remote(cfg) => cfg.validate(),
            _ => Ok(()),
        }
    }

    /// Instantiate the provider. Remote providers probe the service for their
    /// dimension when it is not configured.
    pub fn build(&self) -> Result<Arc<dyn Embedder>> {
        self.validate()?;
        Ok(match self {
            EmbedderConfig::Hash { dim } => Arc::new(HashEmbedder::new(*dim)?),
            EmbedderConfig::Tfidf { vectorizer } => Arc::new(vectorizer.clone()),
            EmbedderConfig::Remote(cfg) => Arc::new(RemoteEmbedder::connect(cfg.clone())?),
        })
    }
}
