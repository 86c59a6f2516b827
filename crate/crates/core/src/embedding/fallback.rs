use super::{Embedder, EmbeddingVector};
use crate::error::Result;

/// Output dimension of the built-in embedder.
pub const FALLBACK_DIM: usize = 256;

const FNV_OFFSET: u64 = 14_695_981_039_346_656_037;
const FNV_PRIME: u64 = 1_099_511_628_211;

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Deterministic signed feature-hashing embedder.
///
/// Text is lowercased, whitespace runs collapse to single spaces, and the
/// word unigrams plus `_`-joined adjacent bigrams are hashed with FNV-1a
/// (64-bit). Bit 0 of the hash picks the sign, `(h >> 1) % 256` the bucket.
/// The result is L2-normalised; text without words maps to the zero vector.
pub fn fallback_embed(text: &str) -> EmbeddingVector {
    let lowered = text.to_lowercase();
    let words: Vec<&str> = lowered.split_whitespace().collect();

    let mut buckets = [0i64; FALLBACK_DIM];
    let mut add = |feature: &[u8]| {
        let h = fnv1a64(feature);
        let bucket = ((h >> 1) % FALLBACK_DIM as u64) as usize;
        buckets[bucket] += if h & 1 == 0 { 1 } else { -1 };
    };

    for w in &words {
        add(w.as_bytes());
    }
    let mut bigram = String::new();
    for pair in words.windows(2) {
        bigram.clear();
        bigram.push_str(pair[0]);
        bigram.push('_');
        bigram.push_str(pair[1]);
        add(bigram.as_bytes());
    }

    EmbeddingVector::new(buckets.iter().map(|&c| c as f64).collect()).normalized()
}

/// [`Embedder`] wrapper around [`fallback_embed`].
#[derive(Debug, Clone, Copy, Default)]
pub struct FallbackEmbedder;

impl Embedder for FallbackEmbedder {
    fn id(&self) -> String {
        "fallback-fnv1a-256".to_string()
    }

    fn dimension(&self) -> usize {
        FALLBACK_DIM
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts.iter().map(|t| fallback_embed(t)).collect())
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        Ok(fallback_embed(text))
    }
}
