//! The augmented reference store: labelled training utterances with four
//! paraphrases each and an embedding index over the original texts.

mod paraphrase;
mod store_file;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::ContentCache;
use crate::corpus::{DatasetSplit, EmotionLabel};
use crate::embedding::{Embedder, EmbedderStats, Embedding, EmbeddingIndex};
use crate::error::{Error, Result};
use crate::llm::LlmBackend;
use crate::scalar::Scalar;

pub use paraphrase::{
    generate_paraphrases, parse_paraphrase_list, ParaphraseOutcome, ParaphrasePrompt, Paraphraser,
    DEFAULT_PARAPHRASE_PROMPT_TOML, PARAPHRASE_COUNT,
};
pub use store_file::{load_store, save_store, STORE_FORMAT, STORE_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceExample<T> {
    pub id: String,
    pub source: String,
    pub text: String,
    pub label: EmotionLabel,
    pub paraphrases: [String; PARAPHRASE_COUNT],
    pub embedding: Embedding<T>,
}

/// Backends and configuration a store was built with.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreProvenance {
    pub embedder: String,
    pub llm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Immutable after construction. Every emotion bucket is non-empty and the
/// index holds one entry per example in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceStore<T> {
    examples: Vec<ReferenceExample<T>>,
    buckets: [Vec<usize>; 4],
    index: EmbeddingIndex<T>,
    positions: HashMap<String, usize>,
    provenance: StoreProvenance,
}

impl<T: Scalar> ReferenceStore<T> {
    pub fn from_examples(examples: Vec<ReferenceExample<T>>, dimension: usize, provenance: StoreProvenance) -> Result<Self> {
        let mut buckets: [Vec<usize>; 4] = Default::default();
        let mut index = EmbeddingIndex::new(dimension);
        let mut positions = HashMap::with_capacity(examples.len());
        for (pos, ex) in examples.iter().enumerate() {
            if ex.text.trim().is_empty() || ex.paraphrases.iter().any(|p| p.trim().is_empty()) {
                return Err(Error::StoreCorrupt(format!("example {} has empty text", ex.id)));
            }
            index.push(ex.id.clone(), ex.embedding.clone())?;
            positions.insert(ex.id.clone(), pos);
            buckets[ex.label.index()].push(pos);
        }
        if let Some(label) = EmotionLabel::ALL.into_iter().find(|l| buckets[l.index()].is_empty()) {
            return Err(Error::EmptyBucket(label));
        }
        Ok(ReferenceStore {
            examples,
            buckets,
            index,
            positions,
            provenance,
        })
    }

    pub fn examples(&self) -> &[ReferenceExample<T>] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn example_at(&self, position: usize) -> &ReferenceExample<T> {
        &self.examples[position]
    }

    pub fn get(&self, id: &str) -> Option<&ReferenceExample<T>> {
        self.positions.get(id).map(|&p| &self.examples[p])
    }

    /// Positions of the examples labelled `label`, in store order.
    pub fn bucket(&self, label: EmotionLabel) -> &[usize] {
        &self.buckets[label.index()]
    }

    pub fn bucket_ids(&self, label: EmotionLabel) -> Vec<&str> {
        self.bucket(label).iter().map(|&p| self.examples[p].id.as_str()).collect()
    }

    pub fn bucket_sizes(&self) -> [usize; 4] {
        EmotionLabel::ALL.map(|l| self.bucket(l).len())
    }

    pub fn index(&self) -> &EmbeddingIndex<T> {
        &self.index
    }

    pub fn dimension(&self) -> usize {
        self.index.dimension()
    }

    pub fn provenance(&self) -> &StoreProvenance {
        &self.provenance
    }

    pub fn set_config_hash(&mut self, hash: Option<String>) {
        self.provenance.config_hash = hash;
    }

    /// Sources present, in first-appearance order.
    pub fn sources(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for ex in &self.examples {
            if !out.contains(&ex.source.as_str()) {
                out.push(&ex.source);
            }
        }
        out
    }

    /// Sub-store of the examples whose source is listed.
    pub fn restricted_to(&self, sources: &[String]) -> Result<Self> {
        let kept = self
            .examples
            .iter()
            .filter(|e| sources.iter().any(|s| s == &e.source))
            .cloned()
            .collect();
        Self::from_examples(kept, self.dimension(), self.provenance.clone())
    }
}

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    pub paraphrase_prompt: ParaphrasePrompt,
    /// Parallel paraphrase requests.
    pub workers: usize,
    /// Keep only splits with these names.
    pub sources: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    pub examples: usize,
    pub bucket_sizes: [usize; 4],
    pub paraphrase_cache_hits: usize,
    pub paraphrases_generated: usize,
    pub padded: usize,
    pub fallbacks: usize,
    pub llm_calls: u64,
    pub embedding_cache_hits: u64,
    pub embedding_backend_calls: u64,
}

/// Combines the labelled utterances of `splits` (split order, then split
/// order within each) into a store, generating or loading paraphrases and
/// embedding the original texts.
pub fn build_reference_store<T: Scalar>(
    splits: &[DatasetSplit],
    embedder: &Embedder,
    llm: &LlmBackend,
    paraphrase_cache: &ContentCache,
    options: &BuildOptions,
) -> Result<(ReferenceStore<T>, BuildStats)> {
    let selected: Vec<&DatasetSplit> = splits
        .iter()
        .filter(|s| options.sources.as_ref().is_none_or(|f| f.contains(&s.name)))
        .collect();
    let items: Vec<(String, String, String, EmotionLabel)> = selected
        .iter()
        .flat_map(|split| {
            split.utterances().filter_map(move |u| {
                u.mapped_label.map(|label| {
                    (
                        format!("{}/{}", split.name, u.id()),
                        split.name.clone(),
                        u.groundtruth().to_string(),
                        label,
                    )
                })
            })
        })
        .collect();
    let mut counts = [0usize; 4];
    for (_, _, _, label) in &items {
        counts[label.index()] += 1;
    }
    if let Some(label) = EmotionLabel::ALL.into_iter().find(|l| counts[l.index()] == 0) {
        return Err(Error::EmptyBucket(label));
    }

    let before_embed = embedder.stats();
    let llm_before = llm.transport_calls();
    let paraphraser = Paraphraser::new(llm, &options.paraphrase_prompt, paraphrase_cache);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<(ParaphraseOutcome, bool)> = pool.install(|| {
        items
            .par_iter()
            .map(|(_, _, text, _)| paraphraser.paraphrase(text))
            .collect::<Result<_>>()
    })?;

    let texts: Vec<&str> = items.iter().map(|(_, _, t, _)| t.as_str()).collect();
    let embeddings: Vec<Embedding<T>> = embedder.embed_texts(&texts)?;

    let mut stats = BuildStats::default();
    let mut examples = Vec::with_capacity(items.len());
    for (((id, source, text, label), (outcome, cached)), embedding) in items.into_iter().zip(outcomes).zip(embeddings) {
        if cached {
            stats.paraphrase_cache_hits += 1;
        } else {
            stats.paraphrases_generated += 1;
        }
        stats.padded += usize::from(outcome.padded);
        stats.fallbacks += usize::from(outcome.fallback);
        examples.push(ReferenceExample {
            id,
            source,
            text,
            label,
            paraphrases: outcome.paraphrases,
            embedding,
        });
    }
    let store = ReferenceStore::from_examples(
        examples,
        embedder.dimension(),
        StoreProvenance {
            embedder: embedder.identity(),
            llm: llm.identity(),
            config_hash: None,
        },
    )?;
    let after_embed: EmbedderStats = embedder.stats();
    stats.examples = store.len();
    stats.bucket_sizes = store.bucket_sizes();
    stats.llm_calls = llm.transport_calls() - llm_before;
    stats.embedding_cache_hits = after_embed.cache_hits - before_embed.cache_hits;
    stats.embedding_backend_calls = after_embed.backend_calls - before_embed.backend_calls;
    Ok((store, stats))
}
