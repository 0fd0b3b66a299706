use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::EmotionLabel;

/// Emotion words recognized in model answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SynonymMap(BTreeMap<String, EmotionLabel>);

impl Default for SynonymMap {
    fn default() -> Self {
        use EmotionLabel::*;
        SynonymMap(
            [
                ("happy", Happy),
                ("happiness", Happy),
                ("joy", Happy),
                ("joyful", Happy),
                ("sad", Sad),
                ("sadness", Sad),
                ("sorrow", Sad),
                ("angry", Angry),
                ("anger", Angry),
                ("mad", Angry),
                ("neutral", Neutral),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        )
    }
}

impl SynonymMap {
    pub fn new(entries: impl IntoIterator<Item = (String, EmotionLabel)>) -> Self {
        SynonymMap(entries.into_iter().map(|(k, v)| (k.to_lowercase(), v)).collect())
    }

    /// First known emotion word in `response`; neutral when there is none.
    pub fn parse(&self, response: &str) -> EmotionLabel {
        response
            .to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .find_map(|w| self.0.get(w).copied())
            .unwrap_or(EmotionLabel::Neutral)
    }
}

/// Parses a model answer with the default synonym map.
pub fn parse_prediction(response: &str) -> EmotionLabel {
    static DEFAULT: OnceLock<SynonymMap> = OnceLock::new();
    DEFAULT.get_or_init(SynonymMap::default).parse(response)
}
