use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cache::ContentCache;
use crate::error::{Error, Result};
use crate::hashing::{digest, digest_parts};
use crate::llm::{ChatRequest, LlmBackend};
use crate::prompting::{one_line, substitute};

pub const PARAPHRASE_COUNT: usize = 4;

pub const DEFAULT_PARAPHRASE_PROMPT_TOML: &str = include_str!("default_paraphrase_prompt.toml");

/// Instruction sent to the paraphrasing model; `{text}` in `user` is the utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParaphrasePrompt {
    pub system: String,
    pub user: String,
}

impl Default for ParaphrasePrompt {
    fn default() -> Self {
        toml::from_str(DEFAULT_PARAPHRASE_PROMPT_TOML).expect("default paraphrase prompt parses")
    }
}

impl ParaphrasePrompt {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("paraphrase prompt {}: {e}", path.display())))
    }

    pub fn hash(&self) -> String {
        digest(serde_json::to_vec(self).expect("prompt serializes"))
    }

    pub fn request(&self, text: &str, max_tokens: u32) -> ChatRequest {
        let user = substitute(&self.user, &[("text", &one_line(text))]);
        ChatRequest {
            system_text: self.system.clone(),
            user_text: user,
            max_tokens,
            subject: Some(text.to_string()),
            round_index: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaphraseOutcome {
    pub paraphrases: [String; PARAPHRASE_COUNT],
    /// Fewer than four distinct paraphrases parsed; the rest repeat the original.
    pub padded: bool,
    /// Nothing parseable even after a retry; all four repeat the original.
    pub fallback: bool,
}

/// Items of a numbered (`1.` / `1)`) or dashed (`-`) list, in order,
/// deduplicated case-insensitively. Lines without a marker are ignored.
pub fn parse_paraphrase_list(response: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for line in response.lines() {
        let Some(item) = strip_marker(line.trim()) else {
            continue;
        };
        let item = item
            .trim()
            .trim_matches(|c| matches!(c, '"' | '\u{201c}' | '\u{201d}'))
            .trim();
        if item.is_empty() {
            continue;
        }
        let lower = item.to_lowercase();
        if out.iter().any(|o| o.to_lowercase() == lower) {
            continue;
        }
        out.push(item.to_string());
    }
    out
}

fn strip_marker(line: &str) -> Option<&str> {
    if let Some(rest) = line.strip_prefix('-') {
        return Some(rest);
    }
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    line[digits..]
        .strip_prefix('.')
        .or_else(|| line[digits..].strip_prefix(')'))
}

fn complete_outcome(parsed: Vec<String>, original: &str) -> ParaphraseOutcome {
    let fallback = parsed.is_empty();
    let padded = parsed.len() < PARAPHRASE_COUNT;
    let mut items = parsed.into_iter().take(PARAPHRASE_COUNT);
    let paraphrases = std::array::from_fn(|_| items.next().unwrap_or_else(|| original.to_string()));
    ParaphraseOutcome {
        paraphrases,
        padded,
        fallback,
    }
}

/// Asks `llm` for four paraphrases of `text`.
///
/// An unparseable answer is retried once, bypassing the response cache; if
/// that fails too the outcome repeats the original four times.
pub fn generate_paraphrases(llm: &LlmBackend, prompt: &ParaphrasePrompt, text: &str) -> Result<ParaphraseOutcome> {
    if text.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    let request = prompt.request(text, llm.settings().paraphrase_max_tokens);
    let mut parsed = parse_paraphrase_list(&llm.complete_request(&request)?.response_text);
    if parsed.is_empty() {
        tracing::warn!(text, "unparseable paraphrase response, retrying");
        parsed = parse_paraphrase_list(&llm.complete_fresh(&request)?.response_text);
    }
    let outcome = complete_outcome(parsed, text);
    if outcome.fallback {
        tracing::warn!(text, "no paraphrases parsed; using the original four times");
    } else if outcome.padded {
        tracing::warn!(text, "fewer than four distinct paraphrases; padded with the original");
    }
    Ok(outcome)
}

/// [`generate_paraphrases`] behind a cache keyed by `(llm identity, prompt, text)`.
pub struct Paraphraser<'a> {
    llm: &'a LlmBackend,
    prompt: &'a ParaphrasePrompt,
    cache: &'a ContentCache,
    prompt_hash: String,
}

impl<'a> Paraphraser<'a> {
    pub fn new(llm: &'a LlmBackend, prompt: &'a ParaphrasePrompt, cache: &'a ContentCache) -> Self {
        Paraphraser {
            llm,
            prompt,
            cache,
            prompt_hash: prompt.hash(),
        }
    }

    /// Returns the outcome and whether it came from the cache.
    pub fn paraphrase(&self, text: &str) -> Result<(ParaphraseOutcome, bool)> {
        let key = digest_parts([
            "paraphrase",
            self.llm.identity().as_str(),
            self.prompt_hash.as_str(),
            text,
        ]);
        if let Some(hit) = self.cache.get(&key) {
            return Ok((serde_json::from_str(&hit)?, true));
        }
        let outcome = generate_paraphrases(self.llm, self.prompt, text)?;
        self.cache.put(&key, &serde_json::to_string(&outcome)?)?;
        Ok((outcome, false))
    }
}
