use std::cmp::Ordering;
use std::collections::HashSet;

use serde::Serialize;

use super::{cosine_similarity, Embedding};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hit {
    pub example_id: String,
    /// Insertion position of the entry.
    pub position: usize,
    pub score: f64,
}

/// Exact linear-scan index over unit vectors, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingIndex<T> {
    dimension: usize,
    ids: Vec<String>,
    vectors: Vec<Embedding<T>>,
    seen: HashSet<String>,
}

impl<T: Scalar> EmbeddingIndex<T> {
    pub fn new(dimension: usize) -> Self {
        EmbeddingIndex {
            dimension,
            ids: Vec::new(),
            vectors: Vec::new(),
            seen: HashSet::new(),
        }
    }

    pub fn push(&mut self, id: impl Into<String>, vector: Embedding<T>) -> Result<()> {
        let id = id.into();
        if vector.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: vector.dimension(),
            });
        }
        if !self.seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        self.ids.push(id);
        self.vectors.push(vector);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &Embedding<T>)> {
        self.ids.iter().map(String::as_str).zip(&self.vectors)
    }

    fn check_query(&self, query: &Embedding<T>) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if query.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: query.dimension(),
            });
        }
        Ok(())
    }

    fn hit(&self, position: usize, score: f64) -> Hit {
        Hit {
            example_id: self.ids[position].clone(),
            position,
            score,
        }
    }

    /// Most similar entry; the earliest inserted wins ties.
    pub fn top1(&self, query: &Embedding<T>) -> Result<Hit> {
        self.check_query(query)?;
        let mut best = (0, f64::NEG_INFINITY);
        for (i, v) in self.vectors.iter().enumerate() {
            let s = cosine_similarity(query, v);
            if s > best.1 {
                best = (i, s);
            }
        }
        Ok(self.hit(best.0, best.1))
    }

    /// Up to `k` entries by descending score, insertion order among ties.
    pub fn topk(&self, query: &Embedding<T>, k: usize) -> Result<Vec<Hit>> {
        if k == 0 {
            return Err(Error::ZeroK);
        }
        self.check_query(query)?;
        let mut scored: Vec<(usize, f64)> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (i, cosine_similarity(query, v)))
            .collect();
        let by_rank = |a: &(usize, f64), b: &(usize, f64)| -> Ordering {
            b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
        };
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_rank);
            scored.truncate(k);
        }
        scored.sort_unstable_by(by_rank);
        Ok(scored.into_iter().map(|(i, s)| self.hit(i, s)).collect())
    }
}
