//! Text embeddings and the leak-phrase similarity score.

mod fallback;
mod http;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fallback::{fallback_embed, FallbackEmbedder, FALLBACK_DIM};
pub use http::{HttpEmbedder, EMBED_URL_ENV};

/// The prototypical answer-leak phrases used when a config does not name its own.
pub const DEFAULT_LEAK_PHRASES: [&str; 6] = [
    "the correct answer is",
    "the answer is definitely",
    "the choice is",
    "Option C is the right one",
    "We can conclude the answer is",
    "the solution is B",
];

/// A dense vector, either all-zero (no features) or unit-norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(components: Vec<f64>) -> Self {
        EmbeddingVector(components)
    }

    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector(vec![0.0; dim])
    }

    /// Scale to unit L2 norm; an all-zero vector is returned unchanged.
    pub fn normalized(mut self) -> Self {
        let norm = self.norm();
        if norm > 0.0 {
            for c in &mut self.0 {
                *c /= norm;
            }
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }
}

impl std::ops::Neg for EmbeddingVector {
    type Output = EmbeddingVector;

    fn neg(self) -> Self::Output {
        EmbeddingVector(self.0.into_iter().map(|c| -c).collect())
    }
}

/// Something that maps text to fixed-length vectors.
///
/// Equal inputs must give bit-identical vectors within one process, and
/// implementations must be callable from several threads at once.
pub trait Embedder: Send + Sync {
    /// Stable identifier; leak vectors built by one provider cannot be
    /// compared with think vectors from another.
    fn id(&self) -> String;

    fn dimension(&self) -> usize;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let mut out = self.embed_batch(&[text])?;
        out.pop()
            .ok_or_else(|| Error::transport("provider returned no embedding"))
    }
}

impl<E: Embedder + ?Sized> Embedder for Arc<E> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        (**self).embed_batch(texts)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        (**self).embed(text)
    }
}

/// Cosine similarity; 0.0 when either side is all-zero.
pub fn cosine_similarity(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::usage(format!(
            "embedding dimension mismatch: {} vs {}",
            u.dim(),
            v.dim()
        )));
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Leak phrases with their precomputed vectors.
#[derive(Debug, Clone)]
pub struct LeakPhraseSet {
    phrases: Vec<String>,
    vectors: Vec<EmbeddingVector>,
    provider_id: String,
}

impl LeakPhraseSet {
    pub fn build<S: AsRef<str>>(phrases: &[S], provider: &dyn Embedder) -> Result<Self> {
        if phrases.is_empty() {
            return Err(Error::usage("leak phrase set must contain at least one phrase"));
        }
        let texts: Vec<&str> = phrases.iter().map(AsRef::as_ref).collect();
        let vectors = provider.embed_batch(&texts)?;
        if vectors.len() != texts.len() {
            return Err(Error::transport(format!(
                "provider returned {} vectors for {} phrases",
                vectors.len(),
                texts.len()
            )));
        }
        Ok(LeakPhraseSet {
            phrases: texts.iter().map(|s| s.to_string()).collect(),
            vectors,
            provider_id: provider.id(),
        })
    }

    pub fn phrases(&self) -> &[String] {
        &self.phrases
    }

    pub fn vectors(&self) -> &[EmbeddingVector] {
        &self.vectors
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    /// Highest cosine between an already-embedded think block and any phrase.
    pub fn max_similarity(&self, think: &EmbeddingVector) -> Result<f64> {
        let mut best = f64::NEG_INFINITY;
        for v in &self.vectors {
            best = best.max(cosine_similarity(think, v)?);
        }
        Ok(best)
    }
}

/// Leak score of a think block: the maximum cosine against the phrase set.
pub fn max_leak_similarity(
    think_text: &str,
    leaks: &LeakPhraseSet,
    provider: &dyn Embedder,
) -> Result<f64> {
    if provider.id() != leaks.provider_id {
        return Err(Error::usage(format!(
            "leak vectors were built by `{}` but think text is embedded by `{}`",
            leaks.provider_id,
            provider.id()
        )));
    }
    let v = provider.embed(think_text)?;
    leaks.max_similarity(&v)
}
