use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::digest;

/// Named prompt blocks with `{placeholder}` substitution.
///
/// Placeholders: `{speaker}` and `{text}` in `context_line` and
/// `target_line`; `{text}` and `{label}` in `example_line`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub system: String,
    pub context_header: String,
    pub context_line: String,
    pub examples_header: String,
    pub example_line: String,
    pub target_line: String,
}

/// Shipped default template, also available as a file for overriding.
pub const DEFAULT_TEMPLATE_TOML: &str = include_str!("default_template.toml");

impl Default for PromptTemplate {
    fn default() -> Self {
        toml::from_str(DEFAULT_TEMPLATE_TOML).expect("default template parses")
    }
}

impl PromptTemplate {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("template {}: {e}", path.display())))
    }

    /// Content hash for provenance.
    pub fn hash(&self) -> String {
        digest(serde_json::to_vec(self).expect("template serializes"))
    }
}

/// Single-pass `{name}` substitution. Unknown placeholders and braces inside
/// substituted values are left untouched.
pub(crate) fn substitute(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let name = &after[..close];
                match vars.iter().find(|(k, _)| *k == name) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push('{');
                        out.push_str(name);
                        out.push('}');
                    }
                }
                rest = &after[close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// Collapses line breaks so every substituted value stays on one line.
pub(crate) fn one_line(text: &str) -> String {
    text.split(['\r', '\n'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}
