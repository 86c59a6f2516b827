use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::transport::JsonClient;

/// Environment variable consulted when a config names the http embedder without a URL.
pub const EMBED_URL_ENV: &str = "REWARD_FORGE_EMBED_URL";

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

/// Client for a remote sentence-embedding service.
///
/// `POST {base_url}/embed` with `{"texts": [...]}` must answer 200 with
/// `{"embeddings": [[...], ...]}`, one row per input. The dimension is
/// learned from a probe request at connect time and every later response
/// must match it. Vectors are L2-normalised on receipt.
#[derive(Clone)]
pub struct HttpEmbedder {
    endpoint: String,
    client: JsonClient,
    dim: usize,
}

impl std::fmt::Debug for HttpEmbedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpEmbedder")
            .field("endpoint", &self.endpoint)
            .field("dim", &self.dim)
            .finish()
    }
}

impl HttpEmbedder {
    pub fn connect(base_url: &str) -> Result<Self> {
        Self::connect_with_timeout(base_url, Duration::from_secs(30))
    }

    pub fn connect_with_timeout(base_url: &str, timeout: Duration) -> Result<Self> {
        let endpoint = format!("{}/embed", base_url.trim_end_matches('/'));
        let mut embedder = HttpEmbedder {
            endpoint,
            client: JsonClient::new(timeout),
            dim: 0,
        };
        let probe = embedder.request(&["dimension probe"])?;
        let dim = probe[0].len();
        if dim == 0 {
            return Err(Error::transport("embedding service returned zero-length vectors"));
        }
        embedder.dim = dim;
        Ok(embedder)
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let (status, body) = self.client.post(&self.endpoint, None, &EmbedRequest { texts })?;
        if status != 200 {
            return Err(Error::transport(format!(
                "embedding service answered HTTP {status}"
            )));
        }
        let parsed: EmbedResponse = serde_json::from_str(&body)
            .map_err(|e| Error::transport(format!("malformed embedding response: {e}")))?;
        if parsed.embeddings.len() != texts.len() {
            return Err(Error::transport(format!(
                "shape mismatch: {} vectors for {} texts",
                parsed.embeddings.len(),
                texts.len()
            )));
        }
        Ok(parsed.embeddings)
    }
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> String {
        format!("http:{}", self.endpoint)
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let rows = self.request(texts)?;
        rows.into_iter()
            .map(|row| {
                if row.len() != self.dim {
                    return Err(Error::transport(format!(
                        "shape mismatch: expected dimension {}, got {}",
                        self.dim,
                        row.len()
                    )));
                }
                if row.iter().any(|c| !c.is_finite()) {
                    return Err(Error::transport("non-finite embedding component"));
                }
                Ok(EmbeddingVector::new(row).normalized())
            })
            .collect()
    }
}
