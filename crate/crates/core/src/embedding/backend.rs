use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;

use super::Embedding;
use crate::cache::ContentCache;
use crate::error::{Error, Result};
use crate::hashing::{derive_seed, digest_parts};
use crate::retry::RetryPolicy;
use crate::scalar::Scalar;

/// Source of raw (not necessarily normalized) sentence vectors.
pub trait EmbedderBackend: Send + Sync {
    /// Backend and model name; namespaces the cache.
    fn identity(&self) -> String;

    fn dimension(&self) -> usize;

    /// One vector per input, same order.
    fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>>;
}

/// Offline embedder: each lowercase word token maps to a seeded Gaussian
/// vector, and a text embeds as the sum of its token vectors plus a smaller
/// whole-text term. Texts sharing words land close together.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    seed: u64,
    dimension: usize,
}

impl MockEmbedder {
    const TEXT_WEIGHT: f64 = 0.25;

    pub fn new(seed: u64, dimension: usize) -> Self {
        MockEmbedder { seed, dimension }
    }

    fn gaussian(&self, key: &str, weight: f64, acc: &mut [f64]) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, key));
        for a in acc.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *a += weight * z;
        }
    }

    fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut acc = vec![0.0; self.dimension];
        let lower = text.to_lowercase();
        for token in lower
            .split(|c: char| !c.is_alphanumeric() && c != '\'')
            .map(|t| t.trim_matches('\''))
            .filter(|t| !t.is_empty())
        {
            self.gaussian(&format!("token:{token}"), 1.0, &mut acc);
        }
        self.gaussian(&format!("text:{}", text.trim()), Self::TEXT_WEIGHT, &mut acc);
        acc
    }
}

impl EmbedderBackend for MockEmbedder {
    fn identity(&self) -> String {
        format!("mock-embedder:seed={}:dim={}", self.seed, self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// OpenAI-embeddings-compatible HTTP service.
///
/// Request `{"model", "input": [..]}`, response `{"data": [{"index", "embedding"}]}`.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    url: String,
    model: String,
    api_key: Option<String>,
    dimension: usize,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(url: impl Into<String>, model: impl Into<String>, api_key: Option<String>, dimension: usize, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteEmbedder {
            url: url.into(),
            model: model.into(),
            api_key,
            dimension,
            agent,
        }
    }
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

impl EmbedderBackend for RemoteEmbedder {
    fn identity(&self) -> String {
        format!("remote-embedder:{}:{}", self.url, self.model)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let body = serde_json::json!({ "model": self.model, "input": texts });
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(crate::llm::transport_error)?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(crate::llm::transport_error)?;
        crate::llm::check_status(status, &text)?;
        let parsed: EmbeddingsResponse = serde_json::from_str(&text)
            .map_err(|e| Error::MalformedResponse(format!("embedding response: {e}")))?;
        let mut slots: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        for d in parsed.data {
            let slot = slots
                .get_mut(d.index)
                .ok_or_else(|| Error::MalformedResponse(format!("embedding index {} out of range", d.index)))?;
            *slot = Some(d.embedding);
        }
        slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| Error::MalformedResponse(format!("missing embedding {i}"))))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmbedderStats {
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub backend_calls: u64,
}

/// Backend plus normalization, batching, retries, and a content cache keyed
/// by `hash(identity ‖ text)`.
pub struct Embedder {
    backend: Arc<dyn EmbedderBackend>,
    dimension: usize,
    cache: ContentCache,
    retry: RetryPolicy,
    batch_size: usize,
    backend_calls: AtomicU64,
}

impl Embedder {
    /// Fails when the backend's dimension disagrees with the configured one.
    pub fn new(backend: Arc<dyn EmbedderBackend>, dimension: usize, cache: ContentCache, retry: RetryPolicy) -> Result<Self> {
        if backend.dimension() != dimension {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                got: backend.dimension(),
            });
        }
        Ok(Embedder {
            backend,
            dimension,
            cache,
            retry,
            batch_size: 64,
            backend_calls: AtomicU64::new(0),
        })
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn identity(&self) -> String {
        self.backend.identity()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn stats(&self) -> EmbedderStats {
        let c = self.cache.stats();
        EmbedderStats {
            cache_hits: c.hits,
            cache_misses: c.misses,
            backend_calls: self.backend_calls.load(Ordering::Relaxed),
        }
    }

    fn key(&self, text: &str) -> String {
        digest_parts([self.identity().as_str(), text])
    }

    /// One unit vector per text, order-preserving.
    pub fn embed_texts<T: Scalar>(&self, texts: &[&str]) -> Result<Vec<Embedding<T>>> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(Error::EmptyText);
        }
        let mut resolved: BTreeMap<&str, Embedding<f64>> = BTreeMap::new();
        let mut missing: Vec<&str> = Vec::new();
        for &t in texts {
            if resolved.contains_key(t) || missing.contains(&t) {
                continue;
            }
            match self.cache.get(&self.key(t)) {
                Some(v) => {
                    let comps: Vec<f64> = serde_json::from_str(&v)?;
                    resolved.insert(t, Embedding::from_unit(comps)?);
                }
                None => missing.push(t),
            }
        }
        for chunk in missing.chunks(self.batch_size) {
            let raw = self.retry.run(|| {
                self.backend_calls.fetch_add(1, Ordering::Relaxed);
                self.backend.embed_raw(chunk)
            })?;
            if raw.len() != chunk.len() {
                return Err(Error::MalformedResponse(format!(
                    "expected {} embeddings, got {}",
                    chunk.len(),
                    raw.len()
                )));
            }
            for (&t, v) in chunk.iter().zip(raw) {
                if v.len() != self.dimension {
                    return Err(Error::DimensionMismatch {
                        expected: self.dimension,
                        got: v.len(),
                    });
                }
                let e = Embedding::<f64>::normalized(&v)?;
                self.cache.put(&self.key(t), &serde_json::to_string(e.as_slice())?)?;
                resolved.insert(t, e);
            }
        }
        Ok(texts.iter().map(|t| resolved[t].cast()).collect())
    }

    pub fn embed_one<T: Scalar>(&self, text: &str) -> Result<Embedding<T>> {
        Ok(self.embed_texts(&[text])?.remove(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{cosine_similarity, DEFAULT_DIMENSION, UNIT_NORM_TOLERANCE};

    fn mock() -> Embedder {
        Embedder::new(
            Arc::new(MockEmbedder::new(7, DEFAULT_DIMENSION)),
            DEFAULT_DIMENSION,
            ContentCache::in_memory(),
            RetryPolicy::immediate(0),
        )
        .unwrap()
    }

    #[test]
    fn identical_texts_identical_vectors() {
        let e = mock();
        let v: Vec<Embedding<f32>> = e.embed_texts(&["hello", "hello"]).unwrap();
        assert_eq!(v[0], v[1]);
        assert!((v[0].norm() - 1.0).abs() <= UNIT_NORM_TOLERANCE);
        assert_eq!(e.stats().backend_calls, 1);
    }

    #[test]
    fn mock_is_bitwise_reproducible_across_instances() {
        let a = MockEmbedder::new(3, 16).embed_raw(&["the same text"]).unwrap();
        let b = MockEmbedder::new(3, 16).embed_raw(&["the same text"]).unwrap();
        assert_eq!(a, b);
        let c = MockEmbedder::new(4, 16).embed_raw(&["the same text"]).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shared_words_are_closer() {
        let e = mock();
        let v: Vec<Embedding<f64>> = e
            .embed_texts(&["I am so angry at you", "I am so angry right now", "the weather report for tuesday"])
            .unwrap();
        assert!(cosine_similarity(&v[0], &v[1]) > cosine_similarity(&v[0], &v[2]));
    }

    #[test]
    fn empty_text_rejected() {
        assert!(matches!(mock().embed_texts::<f32>(&["ok", "  "]), Err(Error::EmptyText)));
    }

    #[test]
    fn dimension_mismatch_is_fatal() {
        let err = Embedder::new(
            Arc::new(MockEmbedder::new(0, 8)),
            DEFAULT_DIMENSION,
            ContentCache::in_memory(),
            RetryPolicy::default(),
        )
        .err()
        .unwrap();
        assert!(matches!(err, Error::DimensionMismatch { expected: 384, got: 8 }));
    }

    struct Lying;
    impl EmbedderBackend for Lying {
        fn identity(&self) -> String {
            "lying".into()
        }
        fn dimension(&self) -> usize {
            4
        }
        fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
            Ok(texts.iter().map(|_| vec![1.0; 3]).collect())
        }
    }

    #[test]
    fn backend_returning_wrong_width_is_rejected() {
        let e = Embedder::new(Arc::new(Lying), 4, ContentCache::in_memory(), RetryPolicy::immediate(0)).unwrap();
        assert!(matches!(
            e.embed_texts::<f32>(&["x"]),
            Err(Error::DimensionMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn warm_cache_skips_backend() {
        let e = mock();
        let cold: Vec<Embedding<f32>> = e.embed_texts(&["a b", "c d"]).unwrap();
        let calls = e.stats().backend_calls;
        let warm: Vec<Embedding<f32>> = e.embed_texts(&["c d", "a b"]).unwrap();
        assert_eq!(e.stats().backend_calls, calls);
        assert_eq!(cold[0], warm[1]);
        assert_eq!(cold[1], warm[0]);
    }
}
