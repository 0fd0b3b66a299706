use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four target emotions. Declaration order is the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Happy,
    Sad,
    Neutral,
    Angry,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 4] = [
        EmotionLabel::Happy,
        EmotionLabel::Sad,
        EmotionLabel::Neutral,
        EmotionLabel::Angry,
    ];

    /// Position in declaration order; also the confusion-matrix row/column.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionLabel::Happy => "happy",
            EmotionLabel::Sad => "sad",
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Angry => "angry",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "happy" => Ok(EmotionLabel::Happy),
            "sad" => Ok(EmotionLabel::Sad),
            "neutral" => Ok(EmotionLabel::Neutral),
            "angry" => Ok(EmotionLabel::Angry),
            other => Err(Error::Config(format!("unknown emotion label {other:?}"))),
        }
    }
}

/// Dataset-native label vocabulary mapped onto the four emotions.
///
/// Keys are stored lowercased; lookups trim and lowercase the raw label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelScheme {
    pub name: String,
    mapping: BTreeMap<String, EmotionLabel>,
}

impl LabelScheme {
    /// Builds a scheme, rejecting mappings that send two raw labels to one emotion.
    pub fn new<I, S>(name: impl Into<String>, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, EmotionLabel)>,
        S: AsRef<str>,
    {
        let name = name.into();
        let mut mapping = BTreeMap::new();
        let mut seen: BTreeMap<EmotionLabel, String> = BTreeMap::new();
        for (raw, label) in pairs {
            let key = normalize_raw(raw.as_ref());
            if key.is_empty() {
                return Err(Error::InvalidScheme(format!("{name}: empty raw label")));
            }
            if let Some(prev) = seen.insert(label, key.clone()) {
                if prev != key {
                    return Err(Error::InvalidScheme(format!(
                        "{name}: both {prev:?} and {key:?} map to {label}"
                    )));
                }
            }
            if let Some(old) = mapping.insert(key.clone(), label) {
                if old != label {
                    return Err(Error::InvalidScheme(format!(
                        "{name}: {key:?} maps to both {old} and {label}"
                    )));
                }
            }
        }
        Ok(LabelScheme { name, mapping })
    }

    /// MELD: Joy / Sadness / Neutral / Anger.
    pub fn meld() -> Self {
        Self::builtin("meld", ["joy", "sadness", "neutral", "anger"])
    }

    /// EmoryNLP: joyful / sad / neutral / mad.
    pub fn emorynlp() -> Self {
        Self::builtin("emorynlp", ["joyful", "sad", "neutral", "mad"])
    }

    /// IEMOCAP, with the happy class already consolidated upstream.
    pub fn iemocap() -> Self {
        Self::builtin("iemocap", ["happy", "sad", "neutral", "angry"])
    }

    fn builtin(name: &str, raws: [&str; 4]) -> Self {
        Self::new(name, raws.into_iter().zip(EmotionLabel::ALL)).expect("builtin schemes are injective")
    }

    pub fn builtin_by_name(name: &str) -> Option<Self> {
        match name.trim().to_lowercase().as_str() {
            "meld" => Some(Self::meld()),
            "emorynlp" | "emory" | "emory-nlp" => Some(Self::emorynlp()),
            "iemocap" => Some(Self::iemocap()),
            _ => None,
        }
    }

    /// Loads a scheme file:
    ///
    /// ```toml
    /// name = "meld"
    /// [mapping]
    /// joy = "happy"
    /// ```
    pub fn from_file(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct SchemeFile {
            name: String,
            mapping: BTreeMap<String, EmotionLabel>,
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: SchemeFile = toml::from_str(&text)
            .map_err(|e| Error::InvalidScheme(format!("{}: {e}", path.display())))?;
        Self::new(file.name, file.mapping)
    }

    /// Builtin name (`meld`, `emorynlp`, `iemocap`) or path to a scheme file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if let Some(s) = Self::builtin_by_name(name_or_path) {
            return Ok(s);
        }
        let path = Path::new(name_or_path);
        if path.exists() {
            Self::from_file(path)
        } else {
            Err(Error::UnknownScheme(name_or_path.to_string()))
        }
    }

    pub fn map(&self, raw: &str) -> Option<EmotionLabel> {
        self.mapping.get(&normalize_raw(raw)).copied()
    }

    pub fn mapping(&self) -> &BTreeMap<String, EmotionLabel> {
        &self.mapping
    }
}

fn normalize_raw(raw: &str) -> String {
    raw.trim().to_lowercase()
}

/// Case-insensitive, whitespace-trimmed lookup; `None` for labels outside the scheme.
pub fn map_raw_label(raw: &str, scheme: &LabelScheme) -> Option<EmotionLabel> {
    scheme.map(raw)
}
