use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cache::ContentCache;
use crate::corpus::{EmotionLabel, SourceFormat};
use crate::embedding::{Embedder, EmbedderBackend, MockEmbedder, RemoteEmbedder, DEFAULT_DIMENSION};
use crate::error::{Error, Result};
use crate::hashing::digest;
use crate::llm::{
    ChatTransport, ConstantMock, LlmBackend, LlmSettings, OpenAiChat, ParaphraseMock, ScriptedMock, DEFAULT_CLASSIFY_MAX_TOKENS,
    DEFAULT_PARAPHRASE_MAX_TOKENS, DEFAULT_TEMPERATURE,
};
use crate::prompting::{AerRoundOrder, PromptStrategy, RandomPool};
use crate::retry::RetryPolicy;

/// Chat endpoint base URL when the config leaves it unset.
pub const ENV_LLM_URL: &str = "AERKIT_LLM_URL";
/// Default variable holding the chat endpoint API key.
pub const ENV_API_KEY: &str = "AERKIT_API_KEY";
/// Embedding service URL when the config leaves it unset.
pub const ENV_EMBEDDER_URL: &str = "AERKIT_EMBEDDER_URL";
/// Cache directory when the config leaves it unset.
pub const ENV_CACHE_DIR: &str = "AERKIT_CACHE_DIR";

fn default_variant() -> String {
    crate::corpus::GROUNDTRUTH.to_string()
}
fn default_seed() -> u64 {
    42
}
fn default_workers() -> usize {
    4
}
fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}
fn default_max_tokens() -> u32 {
    DEFAULT_CLASSIFY_MAX_TOKENS
}
fn default_paraphrase_max_tokens() -> u32 {
    DEFAULT_PARAPHRASE_MAX_TOKENS
}
fn default_retry_budget() -> u32 {
    3
}
fn default_retry_base_ms() -> u64 {
    500
}
fn default_timeout_secs() -> u64 {
    60
}
fn default_dimension() -> usize {
    DEFAULT_DIMENSION
}
fn default_batch_size() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TransportConfig {
    /// OpenAI-compatible chat endpoint.
    Openai {
        #[serde(default)]
        base_url: Option<String>,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
    },
    Constant {
        response: String,
    },
    Scripted {
        script: PathBuf,
    },
    Paraphrase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    #[serde(flatten)]
    pub transport: TransportConfig,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_paraphrase_max_tokens")]
    pub paraphrase_max_tokens: u32,
    #[serde(default = "default_retry_budget")]
    pub retry_budget: u32,
    #[serde(default = "default_retry_base_ms")]
    pub retry_base_ms: u64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    /// Response caching; defaults to on for HTTP endpoints and off for mocks.
    #[serde(default)]
    pub cache: Option<bool>,
}

impl LlmConfig {
    pub fn mock_constant(response: impl Into<String>) -> Self {
        Self::with_transport(TransportConfig::Constant {
            response: response.into(),
        })
    }

    pub fn with_transport(transport: TransportConfig) -> Self {
        LlmConfig {
            transport,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_CLASSIFY_MAX_TOKENS,
            paraphrase_max_tokens: DEFAULT_PARAPHRASE_MAX_TOKENS,
            retry_budget: default_retry_budget(),
            retry_base_ms: default_retry_base_ms(),
            timeout_secs: default_timeout_secs(),
            cache: None,
        }
    }

    fn transport(&self) -> Result<Arc<dyn ChatTransport>> {
        Ok(match &self.transport {
            TransportConfig::Openai {
                base_url,
                model,
                api_key_env,
            } => {
                let url = base_url
                    .clone()
                    .or_else(|| std::env::var(ENV_LLM_URL).ok())
                    .ok_or_else(|| Error::Config(format!("llm.base_url is unset and {ENV_LLM_URL} is not defined")))?;
                let key = std::env::var(api_key_env.as_deref().unwrap_or(ENV_API_KEY)).ok();
                Arc::new(OpenAiChat::new(&url, model.clone(), key, Duration::from_secs(self.timeout_secs)))
            }
            TransportConfig::Constant { response } => Arc::new(ConstantMock::new(response.clone())),
            TransportConfig::Scripted { script } => Arc::new(ScriptedMock::from_file(script)?),
            TransportConfig::Paraphrase => Arc::new(ParaphraseMock),
        })
    }

    pub fn build(&self, cache_root: Option<&Path>) -> Result<LlmBackend> {
        let settings = LlmSettings {
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            paraphrase_max_tokens: self.paraphrase_max_tokens,
        };
        let retry = RetryPolicy::new(self.retry_budget, Duration::from_millis(self.retry_base_ms));
        let backend = LlmBackend::new(self.transport()?, settings, retry)?;
        let cache = self
            .cache
            .unwrap_or(matches!(self.transport, TransportConfig::Openai { .. }));
        Ok(if cache {
            backend.with_cache(ContentCache::open(cache_root, "llm")?)
        } else {
            backend
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EmbedderBackendConfig {
    Mock {
        #[serde(default)]
        seed: u64,
    },
    /// OpenAI-embeddings-compatible service.
    Remote {
        #[serde(default)]
        url: Option<String>,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    #[serde(flatten)]
    pub backend: EmbedderBackendConfig,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_retry_budget")]
    pub retry_budget: u32,
    #[serde(default = "default_retry_base_ms")]
    pub retry_base_ms: u64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            backend: EmbedderBackendConfig::Mock { seed: 0 },
            dimension: DEFAULT_DIMENSION,
            batch_size: default_batch_size(),
            retry_budget: default_retry_budget(),
            retry_base_ms: default_retry_base_ms(),
            timeout_secs: default_timeout_secs(),
        }
    }
}

impl EmbedderConfig {
    pub fn build(&self, cache_root: Option<&Path>) -> Result<Embedder> {
        let backend: Arc<dyn EmbedderBackend> = match &self.backend {
            EmbedderBackendConfig::Mock { seed } => Arc::new(MockEmbedder::new(*seed, self.dimension)),
            EmbedderBackendConfig::Remote {
                url,
                model,
                api_key_env,
            } => {
                let url = url
                    .clone()
                    .or_else(|| std::env::var(ENV_EMBEDDER_URL).ok())
                    .ok_or_else(|| Error::Config(format!("embedder.url is unset and {ENV_EMBEDDER_URL} is not defined")))?;
                let key = api_key_env.as_deref().and_then(|v| std::env::var(v).ok());
                Arc::new(RemoteEmbedder::new(
                    url,
                    model.clone(),
                    key,
                    self.dimension,
                    Duration::from_secs(self.timeout_secs),
                ))
            }
        };
        let retry = RetryPolicy::new(self.retry_budget, Duration::from_millis(self.retry_base_ms));
        Ok(Embedder::new(backend, self.dimension, ContentCache::open(cache_root, "embeddings")?, retry)?
            .with_batch_size(self.batch_size))
    }
}

/// One experiment: dataset, transcript variant, strategy, and backends.
///
/// `workers` and `cache_dir` only affect execution and are left out of the
/// provenance echo, so reports do not depend on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    /// Builtin scheme name or path to a scheme file.
    pub scheme: String,
    #[serde(default = "default_variant")]
    pub variant: String,
    pub strategy: PromptStrategy,
    /// Preceding turns shown; unset means the per-dataset default.
    #[serde(default)]
    pub context_size: Option<usize>,
    #[serde(default)]
    pub store: Option<PathBuf>,
    /// Restrict the loaded store to these sources.
    #[serde(default)]
    pub store_sources: Option<Vec<String>>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub limit: Option<usize>,
    #[serde(default)]
    pub template: Option<PathBuf>,
    #[serde(default)]
    pub aer_round_order: AerRoundOrder,
    #[serde(default)]
    pub random_pool: RandomPool,
    /// Replaces the default answer-synonym map when set.
    #[serde(default)]
    pub synonyms: Option<BTreeMap<String, EmotionLabel>>,
    pub llm: LlmConfig,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

/// Default context sizes: IEMOCAP 10, MELD 0, EmoryNLP 0.
pub fn default_context_size(scheme: &str) -> usize {
    match scheme.trim().to_lowercase().as_str() {
        "iemocap" => 10,
        _ => 0,
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategy.uses_slate() && self.store.is_none() {
            return Err(Error::Config(format!("strategy {} requires a store path", self.strategy)));
        }
        if self.variant.trim().is_empty() {
            return Err(Error::Config("variant must be non-empty".into()));
        }
        Ok(())
    }

    /// Context size actually used: zero for zero-shot, else configured or default.
    pub fn effective_context_size(&self) -> usize {
        if self.strategy == PromptStrategy::ZeroShot {
            0
        } else {
            self.context_size.unwrap_or_else(|| default_context_size(&self.scheme))
        }
    }

    pub fn cache_root(&self) -> Option<PathBuf> {
        self.cache_dir
            .clone()
            .or_else(|| std::env::var_os(ENV_CACHE_DIR).map(PathBuf::from))
    }

    /// Config echo embedded in reports: every field except execution-only ones.
    pub fn provenance(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("workers");
            map.remove("cache_dir");
            map.insert("context_size".into(), self.effective_context_size().into());
        }
        v
    }

    pub fn provenance_hash(&self) -> String {
        digest(serde_json::to_vec(&self.provenance()).expect("value serializes"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSource {
    pub path: PathBuf,
    pub scheme: String,
    #[serde(default = "default_format")]
    pub format: SourceFormat,
}

fn default_format() -> SourceFormat {
    SourceFormat::Jsonl
}

/// Reference-store build: training splits, backends, and output path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreBuildConfig {
    pub splits: Vec<SplitSource>,
    pub out: PathBuf,
    #[serde(default)]
    pub sources: Option<Vec<String>>,
    #[serde(default)]
    pub paraphrase_prompt: Option<PathBuf>,
    pub llm: LlmConfig,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

impl StoreBuildConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn cache_root(&self) -> Option<PathBuf> {
        self.cache_dir
            .clone()
            .or_else(|| std::env::var_os(ENV_CACHE_DIR).map(PathBuf::from))
    }

    pub fn provenance_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("workers");
            map.remove("cache_dir");
        }
        digest(serde_json::to_vec(&v).expect("value serializes"))
    }
}
