//! Conversation datasets: ingest, four-class label mapping, prediction
//! targets, and preceding-context windows.

mod convert;
mod label;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use convert::{convert_emorynlp_csv, convert_meld_csv, Converted, SourceFormat};
pub use label::{map_raw_label, EmotionLabel, LabelScheme};

/// Transcript variant every utterance must carry.
pub const GROUNDTRUTH: &str = "groundtruth";

/// One line of the canonical ingest file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestRecord {
    pub conversation_id: String,
    pub turn_index: usize,
    pub speaker: String,
    pub texts: BTreeMap<String, String>,
    #[serde(default)]
    pub raw_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub conversation_id: String,
    pub turn_index: usize,
    pub speaker: String,
    pub texts: BTreeMap<String, String>,
    pub raw_label: Option<String>,
    pub mapped_label: Option<EmotionLabel>,
}

impl Utterance {
    /// Stable identifier `conversation_id#turn_index`.
    pub fn id(&self) -> String {
        format!("{}#{}", self.conversation_id, self.turn_index)
    }

    pub fn groundtruth(&self) -> &str {
        &self.texts[GROUNDTRUTH]
    }

    /// Text for `variant`, falling back to the groundtruth transcript.
    pub fn text(&self, variant: &str) -> &str {
        self.texts
            .get(variant)
            .unwrap_or_else(|| &self.texts[GROUNDTRUTH])
    }

    pub fn has_variant(&self, variant: &str) -> bool {
        self.texts.contains_key(variant)
    }

    fn to_record(&self) -> IngestRecord {
        IngestRecord {
            conversation_id: self.conversation_id.clone(),
            turn_index: self.turn_index,
            speaker: self.speaker.clone(),
            texts: self.texts.clone(),
            raw_label: self.raw_label.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    pub utterances: Vec<Utterance>,
}

/// Immutable dataset split. Conversations are sorted by id and turns by index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub name: String,
    pub conversations: Vec<Conversation>,
    pub scheme: LabelScheme,
}

/// One `(speaker, text)` line of conversation context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextLine {
    pub speaker: String,
    pub text: String,
}

impl DatasetSplit {
    /// Assembles a split from records, validating turn density and texts.
    pub fn from_records(
        name: impl Into<String>,
        records: impl IntoIterator<Item = IngestRecord>,
        scheme: LabelScheme,
    ) -> Result<Self> {
        let mut grouped: BTreeMap<String, BTreeMap<usize, Utterance>> = BTreeMap::new();
        for rec in records {
            validate_texts(&rec).map_err(|m| Error::Config(format!("{}#{}: {m}", rec.conversation_id, rec.turn_index)))?;
            let mapped_label = rec.raw_label.as_deref().and_then(|r| scheme.map(r));
            let utt = Utterance {
                conversation_id: rec.conversation_id,
                turn_index: rec.turn_index,
                speaker: rec.speaker,
                texts: rec.texts,
                raw_label: rec.raw_label,
                mapped_label,
            };
            let turns = grouped.entry(utt.conversation_id.clone()).or_default();
            if turns.contains_key(&utt.turn_index) {
                return Err(Error::DuplicateTurn {
                    conversation_id: utt.conversation_id,
                    turn_index: utt.turn_index,
                });
            }
            turns.insert(utt.turn_index, utt);
        }
        let mut conversations = Vec::with_capacity(grouped.len());
        for (id, turns) in grouped {
            if let Some(missing) = turns.keys().enumerate().find(|(i, t)| i != *t).map(|(i, _)| i) {
                return Err(Error::SparseTurns {
                    conversation_id: id,
                    missing,
                });
            }
            conversations.push(Conversation {
                id,
                utterances: turns.into_values().collect(),
            });
        }
        Ok(DatasetSplit {
            name: name.into(),
            conversations,
            scheme,
        })
    }

    /// All utterances in deterministic order.
    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.conversations.iter().flat_map(|c| c.utterances.iter())
    }

    pub fn len(&self) -> usize {
        self.conversations.iter().map(|c| c.utterances.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn conversation(&self, id: &str) -> Option<&Conversation> {
        self.conversations
            .binary_search_by(|c| c.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.conversations[i])
    }

    /// Per-label counts of predictable targets, in declaration order.
    pub fn label_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for u in self.utterances() {
            if let Some(l) = u.mapped_label {
                counts[l.index()] += 1;
            }
        }
        counts
    }

    /// Writes the split back out in the canonical line-delimited format.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        for u in self.utterances() {
            serde_json::to_writer(&mut out, &u.to_record())?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

fn validate_texts(rec: &IngestRecord) -> std::result::Result<(), String> {
    if !rec.texts.contains_key(GROUNDTRUTH) {
        return Err(format!("missing {GROUNDTRUTH:?} text"));
    }
    if let Some((k, _)) = rec.texts.iter().find(|(_, v)| v.trim().is_empty()) {
        return Err(format!("empty text for variant {k:?}"));
    }
    Ok(())
}

/// Loads a canonical line-delimited dataset file. Blank lines are skipped.
pub fn load_dataset(path: &Path, scheme: LabelScheme) -> Result<DatasetSplit> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: IngestRecord = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        validate_texts(&rec).map_err(malformed)?;
        records.push(rec);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    DatasetSplit::from_records(name, records, scheme)
}

/// Reads a dataset in any supported source format.
///
/// Returns the split and the number of rows dropped for empty text (always
/// 0 for canonical input, which rejects empty text instead).
pub fn ingest_file(path: &Path, format: SourceFormat, scheme: LabelScheme) -> Result<(DatasetSplit, usize)> {
    let converted = match format {
        SourceFormat::Jsonl => return Ok((load_dataset(path, scheme)?, 0)),
        SourceFormat::MeldCsv => convert_meld_csv(path)?,
        SourceFormat::EmorynlpCsv => convert_emorynlp_csv(path)?,
    };
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let split = DatasetSplit::from_records(name, converted.records, scheme)?;
    Ok((split, converted.skipped_empty))
}

/// Utterances with a mapped label, in split order. The rest are context-only.
pub fn predictable_targets(split: &DatasetSplit) -> Vec<&Utterance> {
    split.utterances().filter(|u| u.mapped_label.is_some()).collect()
}

/// The `min(k, turn_index)` turns immediately before `target` in its
/// conversation, oldest first, rendered in `variant` (groundtruth fallback).
pub fn context_window(
    split: &DatasetSplit,
    target: &Utterance,
    k: usize,
    variant: &str,
) -> Result<Vec<ContextLine>> {
    let conv = split
        .conversation(&target.conversation_id)
        .filter(|c| c.utterances.get(target.turn_index).is_some())
        .ok_or_else(|| Error::TargetNotFound(target.id()))?;
    let end = target.turn_index;
    let start = end.saturating_sub(k);
    Ok(conv.utterances[start..end]
        .iter()
        .map(|u| ContextLine {
            speaker: u.speaker.clone(),
            text: u.text(variant).to_string(),
        })
        .collect())
}
