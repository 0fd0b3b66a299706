//! Chat-completion gateway: OpenAI-compatible HTTP transport, deterministic
//! mock transports, response caching, retries, and answer parsing.

mod mock;
mod openai;
mod parse;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cache::{CacheStats, ContentCache};
use crate::error::{Error, Result};
use crate::hashing::digest_parts;
use crate::prompting::RenderedPrompt;
use crate::retry::RetryPolicy;

pub use mock::{ConstantMock, ParaphraseMock, Script, ScriptEntry, ScriptedMock};
pub use openai::OpenAiChat;
pub use parse::{parse_prediction, SynonymMap};

pub const DEFAULT_TEMPERATURE: f64 = 0.0001;
pub const DEFAULT_CLASSIFY_MAX_TOKENS: u32 = 16;
pub const DEFAULT_PARAPHRASE_MAX_TOKENS: u32 = 256;

/// One system + user exchange sent to a transport.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatRequest {
    pub system_text: String,
    pub user_text: String,
    pub max_tokens: u32,
    /// What the request is about (a target id, or the text being
    /// paraphrased). Only mock transports look at it; it is not sent over
    /// the wire and not part of the cache key.
    pub subject: Option<String>,
    pub round_index: usize,
}

impl ChatRequest {
    pub fn from_prompt(prompt: &RenderedPrompt, max_tokens: u32, subject: Option<String>) -> Self {
        ChatRequest {
            system_text: prompt.system_text.clone(),
            user_text: prompt.user_text.clone(),
            max_tokens,
            subject,
            round_index: prompt.round_index,
        }
    }
}

/// A completed exchange. `response_text` is verbatim, untrimmed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub system_text: String,
    pub user_text: String,
    pub response_text: String,
    pub latency: Duration,
    pub cached: bool,
}

pub trait ChatTransport: Send + Sync {
    /// Endpoint and model; namespaces the response cache.
    fn identity(&self) -> String;

    fn chat(&self, request: &ChatRequest, temperature: f64) -> Result<String>;
}

/// Sampling settings shared by every request through an [`LlmBackend`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlmSettings {
    pub temperature: f64,
    pub max_tokens: u32,
    pub paraphrase_max_tokens: u32,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_CLASSIFY_MAX_TOKENS,
            paraphrase_max_tokens: DEFAULT_PARAPHRASE_MAX_TOKENS,
        }
    }
}

/// A transport with sampling settings, retry budget, and optional cache.
pub struct LlmBackend {
    transport: Arc<dyn ChatTransport>,
    settings: LlmSettings,
    retry: RetryPolicy,
    cache: Option<ContentCache>,
    transport_calls: AtomicU64,
}

impl LlmBackend {
    pub fn new(transport: Arc<dyn ChatTransport>, settings: LlmSettings, retry: RetryPolicy) -> Result<Self> {
        if !(settings.temperature > 0.0 && settings.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                settings.temperature
            )));
        }
        if settings.max_tokens == 0 || settings.paraphrase_max_tokens == 0 {
            return Err(Error::Config("max_tokens must be positive".into()));
        }
        Ok(LlmBackend {
            transport,
            settings,
            retry,
            cache: None,
            transport_calls: AtomicU64::new(0),
        })
    }

    pub fn with_cache(mut self, cache: ContentCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn identity(&self) -> String {
        self.transport.identity()
    }

    pub fn settings(&self) -> &LlmSettings {
        &self.settings
    }

    pub fn transport_calls(&self) -> u64 {
        self.transport_calls.load(Ordering::Relaxed)
    }

    pub fn cache_stats(&self) -> CacheStats {
        self.cache.as_ref().map(ContentCache::stats).unwrap_or_default()
    }

    /// Cache key: `hash(identity ‖ system ‖ user ‖ temperature ‖ max_tokens)`.
    pub fn cache_key(&self, request: &ChatRequest) -> String {
        digest_parts([
            self.identity(),
            request.system_text.clone(),
            request.user_text.clone(),
            format!("{:e}", self.settings.temperature),
            request.max_tokens.to_string(),
        ])
    }

    /// Classifies a rendered prompt with the classification token budget.
    pub fn complete(&self, prompt: &RenderedPrompt, subject: Option<String>) -> Result<ChatExchange> {
        self.complete_request(&ChatRequest::from_prompt(prompt, self.settings.max_tokens, subject))
    }

    /// Cached when possible, otherwise sent with retries and cached.
    pub fn complete_request(&self, request: &ChatRequest) -> Result<ChatExchange> {
        let start = Instant::now();
        let key = self.cache_key(request);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            return Ok(self.exchange(request, hit, start, true));
        }
        let response = self.send(request)?;
        if let Some(cache) = &self.cache {
            cache.put(&key, &response)?;
        }
        Ok(self.exchange(request, response, start, false))
    }

    /// Bypasses the cache on read; the fresh response replaces any cached one.
    pub fn complete_fresh(&self, request: &ChatRequest) -> Result<ChatExchange> {
        let start = Instant::now();
        let response = self.send(request)?;
        if let Some(cache) = &self.cache {
            cache.put(&self.cache_key(request), &response)?;
        }
        Ok(self.exchange(request, response, start, false))
    }

    fn send(&self, request: &ChatRequest) -> Result<String> {
        self.retry.run(|| {
            self.transport_calls.fetch_add(1, Ordering::Relaxed);
            self.transport.chat(request, self.settings.temperature)
        })
    }

    fn exchange(&self, request: &ChatRequest, response_text: String, start: Instant, cached: bool) -> ChatExchange {
        ChatExchange {
            system_text: request.system_text.clone(),
            user_text: request.user_text.clone(),
            response_text,
            latency: start.elapsed(),
            cached,
        }
    }
}

pub(crate) fn transport_error(e: ureq::Error) -> Error {
    let retryable = matches!(
        e,
        ureq::Error::Io(_)
            | ureq::Error::Timeout(_)
            | ureq::Error::ConnectionFailed
            | ureq::Error::HostNotFound
    );
    Error::Transport {
        message: e.to_string(),
        retryable,
    }
}

/// 429 and 5xx are retryable; other non-2xx statuses are not.
pub(crate) fn check_status(status: u16, body: &str) -> Result<()> {
    if (200..300).contains(&status) {
        return Ok(());
    }
    let snippet: String = body.chars().take(200).collect();
    Err(Error::Transport {
        message: format!("HTTP {status}: {snippet}"),
        retryable: status == 429 || status >= 500,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    struct Flaky {
        failures: Mutex<u32>,
    }

    impl ChatTransport for Flaky {
        fn identity(&self) -> String {
            "flaky".into()
        }
        fn chat(&self, _: &ChatRequest, _: f64) -> Result<String> {
            let mut f = self.failures.lock().unwrap();
            if *f > 0 {
                *f -= 1;
                Err(Error::Transport {
                    message: "503".into(),
                    retryable: true,
                })
            } else {
                Ok(" Sad. ".into())
            }
        }
    }

    fn request() -> ChatRequest {
        ChatRequest {
            system_text: "sys".into(),
            user_text: "user".into(),
            max_tokens: 16,
            subject: None,
            round_index: 0,
        }
    }

    #[test]
    fn second_call_is_cached_and_verbatim() {
        let llm = LlmBackend::new(
            Arc::new(Flaky { failures: Mutex::new(1) }),
            LlmSettings::default(),
            RetryPolicy::immediate(2),
        )
        .unwrap()
        .with_cache(ContentCache::in_memory());
        let first = llm.complete_request(&request()).unwrap();
        assert!(!first.cached);
        assert_eq!(first.response_text, " Sad. ");
        let second = llm.complete_request(&request()).unwrap();
        assert!(second.cached);
        assert_eq!(second.response_text, first.response_text);
        assert_eq!(llm.transport_calls(), 2);
    }

    #[test]
    fn budget_exhaustion_surfaces_error() {
        let llm = LlmBackend::new(
            Arc::new(Flaky { failures: Mutex::new(5) }),
            LlmSettings::default(),
            RetryPolicy::immediate(2),
        )
        .unwrap();
        assert!(llm.complete_request(&request()).unwrap_err().is_retryable());
        assert_eq!(llm.transport_calls(), 3);
    }

    #[test]
    fn cache_key_covers_settings() {
        let t: Arc<dyn ChatTransport> = Arc::new(ConstantMock::new("happy"));
        let a = LlmBackend::new(t.clone(), LlmSettings::default(), RetryPolicy::default()).unwrap();
        let b = LlmBackend::new(
            t,
            LlmSettings {
                temperature: 0.5,
                ..LlmSettings::default()
            },
            RetryPolicy::default(),
        )
        .unwrap();
        assert_ne!(a.cache_key(&request()), b.cache_key(&request()));
        let mut longer = request();
        longer.max_tokens = 17;
        assert_ne!(a.cache_key(&request()), a.cache_key(&longer));
        let mut other_subject = request();
        other_subject.subject = Some("x".into());
        assert_eq!(a.cache_key(&request()), a.cache_key(&other_subject));
    }

    #[test]
    fn non_positive_temperature_rejected() {
        let t: Arc<dyn ChatTransport> = Arc::new(ConstantMock::new("happy"));
        let settings = LlmSettings {
            temperature: 0.0,
            ..LlmSettings::default()
        };
        assert!(LlmBackend::new(t, settings, RetryPolicy::default()).is_err());
    }

    #[test]
    fn status_classification() {
        assert!(check_status(200, "").is_ok());
        assert!(check_status(503, "").unwrap_err().is_retryable());
        assert!(check_status(429, "").unwrap_err().is_retryable());
        assert!(!check_status(401, "").unwrap_err().is_retryable());
    }
}
