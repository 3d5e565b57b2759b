//! Text embeddings: a seeded feature-hashing embedder that runs offline and a
//! client for a remote sentence-embedding service. Both return L2-normalized
//! vectors.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::remote::{self, CallError};
use crate::textprep;

pub const DEFAULT_DIMENSION: usize = 256;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("remote embedder unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("remote embedder returned an unexpected shape: {0}")]
    RemoteShapeMismatch(String),
    #[error("invalid embedder spec: {0}")]
    InvalidSpec(String),
}

impl EmbeddingError {
    pub fn code(&self) -> &'static str {
        match self {
            EmbeddingError::DimensionMismatch(..) => "DimensionMismatch",
            EmbeddingError::RemoteUnavailable(_) => "RemoteUnavailable",
            EmbeddingError::RemoteShapeMismatch(_) => "RemoteShapeMismatch",
            EmbeddingError::InvalidSpec(_) => "InvalidSpec",
        }
    }
}

/// Either the zero vector or a unit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn zeros(dimension: usize) -> Self {
        EmbeddingVector(vec![0.0; dimension])
    }

    /// Scales `values` to unit length; an all-zero input stays zero.
    pub fn normalized(mut values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        EmbeddingVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

impl std::ops::Neg for EmbeddingVector {
    type Output = EmbeddingVector;
    fn neg(self) -> Self::Output {
        EmbeddingVector(self.0.into_iter().map(|v| -v).collect())
    }
}

/// `dot(u, v) / (|u| |v|)`, or 0 when either vector is zero.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if u.dimension() != v.dimension() {
        return Err(EmbeddingError::DimensionMismatch(u.dimension(), v.dimension()));
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Hashed,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteEmbedderSpec {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    10_000
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderSpec {
    pub kind: EmbedderKind,
    pub dimension: usize,
    #[serde(default)]
    pub seed: u64,
    /// Hash adjacent-token pairs as well as single tokens.
    #[serde(default = "default_true")]
    pub bigrams: bool,
    #[serde(default)]
    pub remote: Option<RemoteEmbedderSpec>,
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec { kind: EmbedderKind::Hashed, dimension: DEFAULT_DIMENSION, seed: 0, bigrams: true, remote: None }
    }
}

impl EmbedderSpec {
    pub fn hashed(dimension: usize, seed: u64) -> Self {
        EmbedderSpec { dimension, seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dimension == 0 {
            return Err(EmbeddingError::InvalidSpec("dimension must be > 0".into()));
        }
        match (self.kind, &self.remote) {
            (EmbedderKind::Remote, None) => Err(EmbeddingError::InvalidSpec("remote kind needs endpoint settings".into())),
            (EmbedderKind::Hashed, Some(_)) => Err(EmbeddingError::InvalidSpec("remote settings given for hashed kind".into())),
            _ => Ok(()),
        }
    }
}

pub trait Embedder: Send + Sync + std::fmt::Debug {
    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError>;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

pub fn build_embedder(spec: &EmbedderSpec) -> Result<Arc<dyn Embedder>, EmbeddingError> {
    spec.validate()?;
    Ok(match spec.kind {
        EmbedderKind::Hashed => Arc::new(HashedEmbedder::new(spec.dimension, spec.seed).with_bigrams(spec.bigrams)),
        EmbedderKind::Remote => Arc::new(RemoteEmbedder::new(
            spec.remote.clone().expect("validated"),
            spec.dimension,
        )),
    })
}

/// One-shot convenience over [`build_embedder`].
pub fn embed(text: &str, spec: &EmbedderSpec) -> Result<EmbeddingVector, EmbeddingError> {
    build_embedder(spec)?.embed(text)
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const SIGN_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    seed.to_le_bytes()
        .iter()
        .chain(bytes)
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Signed feature hashing over unigrams and bigrams.
#[derive(Debug, Clone)]
pub struct HashedEmbedder {
    dimension: usize,
    seed: u64,
    bigrams: bool,
}

impl HashedEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        HashedEmbedder { dimension, seed, bigrams: true }
    }

    pub fn with_bigrams(mut self, bigrams: bool) -> Self {
        self.bigrams = bigrams;
        self
    }

    fn add_feature(&self, acc: &mut [f64], feature: &str) {
        let bucket = (fnv1a(self.seed, feature.as_bytes()) % self.dimension as u64) as usize;
        let sign = if fnv1a(self.seed ^ SIGN_SALT, feature.as_bytes()) & 1 == 0 { 1.0 } else { -1.0 };
        acc[bucket] += sign;
    }

    pub fn embed_tokens(&self, tokens: &[String]) -> EmbeddingVector {
        let mut acc = vec![0.0; self.dimension];
        for t in tokens {
            self.add_feature(&mut acc, t);
        }
        if self.bigrams {
            for pair in tokens.windows(2) {
                self.add_feature(&mut acc, &format!("{} {}", pair[0], pair[1]));
            }
        }
        EmbeddingVector::normalized(acc)
    }
}

impl Embedder for HashedEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        Ok(self.embed_tokens(&textprep::tokenize(text)))
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for `POST {"model", "input": [..]} -> {"vectors": [[..], ..]}`.
#[derive(Debug)]
pub struct RemoteEmbedder {
    spec: RemoteEmbedderSpec,
    dimension: usize,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(spec: RemoteEmbedderSpec, dimension: usize) -> Self {
        let agent = remote::agent(spec.timeout_ms);
        RemoteEmbedder { spec, dimension, agent }
    }
}

impl Embedder for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let mut out = self.embed_batch(&[text.to_string()])?;
        Ok(out.remove(0))
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let request = EmbedRequest { model: &self.spec.model, input: texts };
        let response: EmbedResponse =
            remote::post_json(&self.agent, &self.spec.endpoint, self.spec.token_env.as_deref(), &request).map_err(|e| match e {
                CallError::Unavailable(msg) => EmbeddingError::RemoteUnavailable(msg),
                CallError::BadBody(msg) => EmbeddingError::RemoteShapeMismatch(msg),
            })?;
        if response.vectors.len() != texts.len() {
            return Err(EmbeddingError::RemoteShapeMismatch(format!(
                "asked for {} vectors, got {}",
                texts.len(),
                response.vectors.len()
            )));
        }
        response
            .vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.dimension {
                    Err(EmbeddingError::RemoteShapeMismatch(format!(
                        "expected dimension {}, got {}",
                        self.dimension,
                        v.len()
                    )))
                } else {
                    Ok(EmbeddingVector::normalized(v))
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(i: usize, d: usize) -> EmbeddingVector {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        EmbeddingVector(v)
    }

    #[test]
    fn empty_text_is_zero() {
        let v = embed("", &EmbedderSpec::default()).unwrap();
        assert!(v.is_zero());
        assert_eq!(v.dimension(), DEFAULT_DIMENSION);
        assert!(embed("  !!! 42 ", &EmbedderSpec::default()).unwrap().is_zero());
    }

    #[test]
    fn deterministic_and_self_similar() {
        let spec = EmbedderSpec::default();
        let a = embed("battery life", &spec).unwrap();
        let b = embed("battery life", &spec).unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-9);
        assert!((cosine(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_basics() {
        let v = embed("clarity", &EmbedderSpec::default()).unwrap();
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        assert!((cosine(&v, &-v.clone()).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(cosine(&basis(0, 4), &basis(1, 4)).unwrap(), 0.0);
        assert_eq!(cosine(&basis(0, 4), &EmbeddingVector::zeros(4)).unwrap(), 0.0);
        assert_eq!(cosine(&basis(0, 4), &basis(0, 3)).unwrap_err().code(), "DimensionMismatch");
    }

    #[test]
    fn seed_changes_vectors() {
        let a = embed("touch sensitivity", &EmbedderSpec::hashed(256, 1)).unwrap();
        let b = embed("touch sensitivity", &EmbedderSpec::hashed(256, 2)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn trailing_whitespace_is_ignored() {
        let spec = EmbedderSpec::default();
        assert_eq!(embed("easy install", &spec).unwrap(), embed("easy install  \n\t", &spec).unwrap());
    }

    #[test]
    fn unigrams_are_order_invariant() {
        let e = HashedEmbedder::new(256, 7).with_bigrams(false);
        assert_eq!(e.embed("fit clarity durability").unwrap(), e.embed("durability fit clarity").unwrap());
        let with = HashedEmbedder::new(256, 7);
        assert_ne!(with.embed("fit clarity durability").unwrap(), with.embed("durability fit clarity").unwrap());
    }

    #[test]
    fn spec_validation() {
        assert!(EmbedderSpec { dimension: 0, ..Default::default() }.validate().is_err());
        assert!(EmbedderSpec { kind: EmbedderKind::Remote, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn remote_unreachable_reports_unavailable() {
        let spec = RemoteEmbedderSpec {
            endpoint: "http://127.0.0.1:9/embed".into(),
            model: "m".into(),
            token_env: None,
            timeout_ms: 200,
        };
        let err = RemoteEmbedder::new(spec, 8).embed("text").unwrap_err();
        assert_eq!(err.code(), "RemoteUnavailable");
    }
}
