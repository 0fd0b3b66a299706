//! Deterministic offline transports.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChatRequest, ChatTransport};
use crate::error::{Error, Result};
use crate::hashing::digest_parts;

/// Answers every request with the same text.
#[derive(Debug, Clone)]
pub struct ConstantMock {
    response: String,
}

impl ConstantMock {
    pub fn new(response: impl Into<String>) -> Self {
        ConstantMock {
            response: response.into(),
        }
    }
}

impl ChatTransport for ConstantMock {
    fn identity(&self) -> String {
        format!("mock-constant:{}", self.response)
    }

    fn chat(&self, _: &ChatRequest, _: f64) -> Result<String> {
        Ok(self.response.clone())
    }
}

/// A scripted answer: one response for all rounds, or one per round index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptEntry {
    Always(String),
    PerRound(Vec<String>),
}

/// Response table for [`ScriptedMock`].
///
/// Lookup order: `by_prompt` (keyed by [`Script::prompt_key`]), then
/// `by_target` (keyed by the request subject), then `default`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    #[serde(default)]
    pub by_prompt: BTreeMap<String, ScriptEntry>,
    #[serde(default)]
    pub by_target: BTreeMap<String, ScriptEntry>,
    #[serde(default)]
    pub default: Option<String>,
}

impl Script {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("script {}: {e}", path.display())))
    }

    /// Same digest as [`crate::prompting::RenderedPrompt::hash`].
    pub fn prompt_key(system_text: &str, user_text: &str) -> String {
        digest_parts([system_text, user_text])
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedMock {
    name: String,
    script: Script,
}

impl ScriptedMock {
    pub fn new(name: impl Into<String>, script: Script) -> Self {
        ScriptedMock {
            name: name.into(),
            script,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let script = Script::load(path)?;
        let digest = crate::hashing::digest(serde_json::to_vec(&script)?);
        Ok(Self::new(format!("file-{}", &digest[..16]), script))
    }

    fn pick(entry: &ScriptEntry, round: usize) -> Option<String> {
        match entry {
            ScriptEntry::Always(s) => Some(s.clone()),
            ScriptEntry::PerRound(v) => v.get(round).cloned(),
        }
    }
}

impl ChatTransport for ScriptedMock {
    fn identity(&self) -> String {
        format!("mock-scripted:{}", self.name)
    }

    fn chat(&self, request: &ChatRequest, _: f64) -> Result<String> {
        let key = Script::prompt_key(&request.system_text, &request.user_text);
        let by_prompt = self.script.by_prompt.get(&key);
        let by_target = request
            .subject
            .as_ref()
            .and_then(|s| self.script.by_target.get(s));
        by_prompt
            .or(by_target)
            .and_then(|e| Self::pick(e, request.round_index))
            .or_else(|| self.script.default.clone())
            .ok_or_else(|| Error::Transport {
                message: format!(
                    "script has no response for prompt {key} (subject {:?}, round {})",
                    request.subject, request.round_index
                ),
                retryable: false,
            })
    }
}

/// Paraphrase generator for offline store builds: answers with a numbered
/// list of four fixed rewrites of the request subject.
#[derive(Debug, Clone, Default)]
pub struct ParaphraseMock;

impl ParaphraseMock {
    pub fn rewrites(text: &str) -> [String; 4] {
        let t = text.trim();
        [
            format!("{t} Really."),
            format!("Well, {t}"),
            format!("I mean, {t}"),
            format!("{t} That is how it is."),
        ]
    }
}

impl ChatTransport for ParaphraseMock {
    fn identity(&self) -> String {
        "mock-paraphrase".into()
    }

    fn chat(&self, request: &ChatRequest, _: f64) -> Result<String> {
        let subject = request.subject.as_deref().ok_or_else(|| Error::Transport {
            message: "paraphrase mock needs a subject".into(),
            retryable: false,
        })?;
        Ok(Self::rewrites(subject)
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{}. {s}", i + 1))
            .collect::<Vec<_>>()
            .join("\n"))
    }
}
