//! Experiment orchestration: per-target prediction under each prompting
//! strategy, five-round AER voting, and deterministic report assembly.

mod config;
mod report;
mod vote;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{context_window, load_dataset, predictable_targets, ContextLine, DatasetSplit, EmotionLabel, LabelScheme, Utterance};
use crate::embedding::{Embedder, Embedding};
use crate::error::{Error, Result};
use crate::evaluation::{macro_f1, per_class_metrics, ConfusionMatrix};
use crate::hashing::derive_seed;
use crate::llm::{LlmBackend, SynonymMap};
use crate::prompting::{
    render_prompt, round_display_text, select_aer_slate, select_random_slate, ExampleSlate, PromptStrategy,
    PromptTemplate, AER_ROUNDS,
};
use crate::reference::{load_store, ReferenceStore};

pub use config::{
    default_context_size, EmbedderBackendConfig, EmbedderConfig, ExperimentConfig, LlmConfig, SplitSource,
    StoreBuildConfig, TransportConfig, ENV_API_KEY, ENV_CACHE_DIR, ENV_EMBEDDER_URL, ENV_LLM_URL,
};
pub use report::{summary_table, ExperimentReport, PredictionRecord, RoundRecord};
pub use vote::majority_vote;

/// Embedding precision used for stores loaded by the engine.
pub type StoreScalar = f32;

/// A configured experiment with its dataset, store, and backends loaded.
/// Shared caches make repeated runs (context sweeps) cheap.
pub struct Experiment {
    config: ExperimentConfig,
    split: DatasetSplit,
    store: Option<ReferenceStore<StoreScalar>>,
    template: PromptTemplate,
    synonyms: SynonymMap,
    llm: LlmBackend,
    embedder: Option<Embedder>,
}

impl Experiment {
    /// Loads everything the config points at. Load failures are fatal.
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let cache_root = config.cache_root();
        let split = load_dataset(&config.dataset, LabelScheme::resolve(&config.scheme)?)?;
        let store = match (&config.store, config.strategy.uses_slate()) {
            (Some(path), true) => Some(load_store(path)?),
            _ => None,
        };
        let template = match &config.template {
            Some(path) => PromptTemplate::from_file(path)?,
            None => PromptTemplate::default(),
        };
        let llm = config.llm.build(cache_root.as_deref())?;
        let embedder = if config.strategy == PromptStrategy::IclAer {
            Some(config.embedder.build(cache_root.as_deref())?)
        } else {
            None
        };
        Self::from_parts(config, split, store, template, llm, embedder)
    }

    /// Assembles an experiment from already-built parts.
    pub fn from_parts(
        config: ExperimentConfig,
        split: DatasetSplit,
        store: Option<ReferenceStore<StoreScalar>>,
        template: PromptTemplate,
        llm: LlmBackend,
        embedder: Option<Embedder>,
    ) -> Result<Self> {
        config.validate()?;
        let store = match (store, &config.store_sources) {
            (Some(s), Some(sources)) => Some(s.restricted_to(sources)?),
            (s, _) => s,
        };
        if config.strategy.uses_slate() && store.is_none() {
            return Err(Error::Config(format!("strategy {} needs a reference store", config.strategy)));
        }
        if config.strategy == PromptStrategy::IclAer {
            let embedder = embedder
                .as_ref()
                .ok_or_else(|| Error::Config("icl-aer needs an embedder".into()))?;
            let store = store.as_ref().expect("checked above");
            if embedder.identity() != store.provenance().embedder {
                return Err(Error::Config(format!(
                    "embedder {:?} differs from the one the store was built with ({:?})",
                    embedder.identity(),
                    store.provenance().embedder
                )));
            }
            if embedder.dimension() != store.dimension() {
                return Err(Error::DimensionMismatch {
                    expected: store.dimension(),
                    got: embedder.dimension(),
                });
            }
        }
        let synonyms = config
            .synonyms
            .as_ref()
            .map(|m| SynonymMap::new(m.clone()))
            .unwrap_or_default();
        Ok(Experiment {
            config,
            split,
            store,
            template,
            synonyms,
            llm,
            embedder,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn split(&self) -> &DatasetSplit {
        &self.split
    }

    pub fn llm(&self) -> &LlmBackend {
        &self.llm
    }

    /// Predictable targets after the optional limit, in split order.
    pub fn targets(&self) -> Vec<&Utterance> {
        let mut t = predictable_targets(&self.split);
        if let Some(limit) = self.config.limit {
            t.truncate(limit);
        }
        t
    }

    /// Runs with the configured context size.
    pub fn run(&self) -> Result<ExperimentReport> {
        self.run_with_context(self.config.effective_context_size())
    }

    /// Runs with `context_size` preceding turns (ignored for zero-shot).
    pub fn run_with_context(&self, context_size: usize) -> Result<ExperimentReport> {
        let mut config = self.config.clone();
        config.context_size = Some(context_size);
        let k = config.effective_context_size();
        let targets = self.targets();
        if let Some(t) = targets.iter().find(|t| !t.has_variant(&config.variant)) {
            return Err(Error::UnknownVariant(format!("{} (missing for target {})", config.variant, t.id())));
        }
        if let Some(embedder) = &self.embedder {
            // Batch the target embeddings up front; failures resurface per target.
            let texts: Vec<&str> = targets.iter().map(|t| t.text(&config.variant)).collect();
            if let Err(e) = embedder.embed_texts::<StoreScalar>(&texts) {
                tracing::warn!(error = %e, "batched target embedding failed; retrying per target");
            }
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        let records: Vec<PredictionRecord> = pool.install(|| {
            targets
                .par_iter()
                .map(|t| self.predict_target(t, k, &config.variant))
                .collect::<Result<_>>()
        })?;
        Ok(self.assemble(&config, k, records))
    }

    fn assemble(&self, config: &ExperimentConfig, k: usize, records: Vec<PredictionRecord>) -> ExperimentReport {
        let mut ordered: Vec<&PredictionRecord> = records.iter().collect();
        ordered.sort_by(|a, b| a.target_id.cmp(&b.target_id));
        let confusion = ConfusionMatrix::from_pairs(
            ordered
                .iter()
                .filter(|r| r.valid)
                .map(|r| (r.gold, r.final_label)),
        );
        let valid = records.iter().filter(|r| r.valid).count();
        ExperimentReport {
            config: config.provenance(),
            config_hash: config.provenance_hash(),
            template_hash: self.template.hash(),
            llm_identity: self.llm.identity(),
            embedder_identity: self.embedder.as_ref().map(Embedder::identity),
            store: self.store.as_ref().map(|s| s.provenance().clone()),
            dataset: self.split.name.clone(),
            variant: config.variant.clone(),
            strategy: config.strategy,
            context_size: k,
            seed: config.seed,
            targets: records.len(),
            valid,
            invalid: records.len() - valid,
            failed_rounds: records.iter().map(PredictionRecord::failed_rounds).sum(),
            per_class: per_class_metrics(&confusion),
            macro_f1: macro_f1(&confusion),
            confusion,
            records,
        }
    }

    fn predict_target(&self, target: &Utterance, k: usize, variant: &str) -> Result<PredictionRecord> {
        let gold = target
            .mapped_label
            .ok_or_else(|| Error::Config(format!("target {} has no mapped label", target.id())))?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, &target.id()));
        let context = context_window(&self.split, target, k, variant)?;
        let strategy = self.config.strategy;
        let mut record = match strategy {
            PromptStrategy::ZeroShot | PromptStrategy::ZeroShotContext => {
                let round = self.predict_single(target, variant, &context, None, 0);
                single_round_record(target, gold, round)
            }
            PromptStrategy::IclRandom => {
                let store = self.store.as_ref().expect("validated");
                match select_random_slate(store, &mut rng, self.config.random_pool) {
                    Ok(slate) => single_round_record(target, gold, self.predict_single(target, variant, &context, Some(&slate), 0)),
                    Err(e) => failed_record(target, gold, 1, format!("slate selection: {e}")),
                }
            }
            PromptStrategy::IclAer => self.predict_aer(target, gold, variant, &context, &mut rng),
        };
        record.valid = record.failed_rounds() * 2 <= record.rounds.len() && !record.rounds.is_empty();
        Ok(record)
    }

    /// Renders, sends, and parses one prompt. Failures are recorded in the
    /// returned round (label neutral, `failed` set) and never abort the run.
    pub fn predict_single(
        &self,
        target: &Utterance,
        variant: &str,
        context: &[ContextLine],
        slate: Option<&ExampleSlate>,
        round_index: usize,
    ) -> (RoundRecord, Option<String>) {
        let prompt = match render_prompt(&self.template, self.config.strategy, target, variant, context, slate, round_index) {
            Ok(p) => p,
            Err(e) => return (failed_round(round_index, None), Some(format!("round {round_index}: render: {e}"))),
        };
        let hash = prompt.hash();
        match self.llm.complete(&prompt, Some(target.id())) {
            Ok(ex) => (
                RoundRecord {
                    round_index,
                    prompt_hash: Some(hash),
                    label: self.synonyms.parse(&ex.response_text),
                    response: Some(ex.response_text),
                    failed: false,
                },
                None,
            ),
            Err(e) => (failed_round(round_index, Some(hash)), Some(format!("round {round_index}: {e}"))),
        }
    }

    /// Five rounds over one fixed slate; only the retrieved slot's text
    /// changes between rounds.
    fn predict_aer(
        &self,
        target: &Utterance,
        gold: EmotionLabel,
        variant: &str,
        context: &[ContextLine],
        rng: &mut ChaCha8Rng,
    ) -> PredictionRecord {
        let store = self.store.as_ref().expect("validated");
        let embedder = self.embedder.as_ref().expect("validated");
        let query: Embedding<StoreScalar> = match embedder.embed_one(target.text(variant)) {
            Ok(q) => q,
            Err(e) => return failed_record(target, gold, AER_ROUNDS, format!("embedding: {e}")),
        };
        let selection = match select_aer_slate(store, &query, rng) {
            Ok(s) => s,
            Err(e) => return failed_record(target, gold, AER_ROUNDS, format!("retrieval: {e}")),
        };
        let order = self.config.aer_round_order;
        let retrieved_label = selection.retrieved.label;
        let mut rounds = Vec::with_capacity(AER_ROUNDS);
        let mut flags = Vec::new();
        for round in 0..AER_ROUNDS {
            let text = round_display_text(selection.retrieved, round, order).expect("round in range");
            let slate = selection.slate.with_display(retrieved_label, text);
            let (r, flag) = self.predict_single(target, variant, context, Some(&slate), round);
            rounds.push(r);
            flags.extend(flag);
        }
        let labels: Vec<EmotionLabel> = rounds.iter().map(|r| r.label).collect();
        PredictionRecord {
            target_id: target.id(),
            gold,
            final_label: majority_vote(&labels, labels[order.original_round()]),
            rounds,
            retrieved_id: Some(selection.retrieved.id.clone()),
            retrieval_score: Some(selection.score),
            failure_flags: flags,
            valid: true,
        }
    }
}

fn failed_round(round_index: usize, prompt_hash: Option<String>) -> RoundRecord {
    RoundRecord {
        round_index,
        prompt_hash,
        response: None,
        label: EmotionLabel::Neutral,
        failed: true,
    }
}

fn single_round_record(target: &Utterance, gold: EmotionLabel, (round, flag): (RoundRecord, Option<String>)) -> PredictionRecord {
    PredictionRecord {
        target_id: target.id(),
        gold,
        final_label: round.label,
        rounds: vec![round],
        retrieved_id: None,
        retrieval_score: None,
        failure_flags: flag.into_iter().collect(),
        valid: true,
    }
}

fn failed_record(target: &Utterance, gold: EmotionLabel, rounds: usize, flag: String) -> PredictionRecord {
    PredictionRecord {
        target_id: target.id(),
        gold,
        rounds: (0..rounds).map(|i| failed_round(i, None)).collect(),
        final_label: EmotionLabel::Neutral,
        retrieved_id: None,
        retrieval_score: None,
        failure_flags: vec![flag],
        valid: false,
    }
}

/// Loads and runs one experiment.
pub fn run_experiment(config: ExperimentConfig) -> Result<ExperimentReport> {
    Experiment::prepare(config)?.run()
}

/// One report per context size, sharing dataset, backends, and caches.
pub fn sweep_context(config: ExperimentConfig, sizes: &[usize]) -> Result<Vec<ExperimentReport>> {
    if config.strategy != PromptStrategy::ZeroShotContext {
        return Err(Error::Config(format!(
            "context sweeps use strategy zero-shot-context, not {}",
            config.strategy
        )));
    }
    if sizes.is_empty() {
        return Ok(Vec::new());
    }
    let experiment = Experiment::prepare(config)?;
    sizes.iter().map(|&k| experiment.run_with_context(k)).collect()
}
