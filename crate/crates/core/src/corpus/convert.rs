//! Converters from upstream CSV exports to canonical ingest records.
//!
//! Both converters group rows into conversations, order turns by the
//! upstream utterance id, and renumber them densely from 0. Rows with an
//! empty utterance are dropped and counted.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{IngestRecord, GROUNDTRUTH};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceFormat {
    /// Canonical line-delimited records.
    Jsonl,
    /// MELD `*_sent_emo.csv`.
    MeldCsv,
    /// EmoryNLP `emorynlp_*_final.csv`.
    EmorynlpCsv,
}

impl FromStr for SourceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(SourceFormat::Jsonl),
            "meld-csv" | "meld" => Ok(SourceFormat::MeldCsv),
            "emorynlp-csv" | "emorynlp" => Ok(SourceFormat::EmorynlpCsv),
            other => Err(Error::Config(format!(
                "unknown source format {other:?} (expected jsonl, meld-csv, emorynlp-csv)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Converted {
    pub records: Vec<IngestRecord>,
    pub skipped_empty: usize,
}

struct Row {
    conversation: String,
    order: u64,
    speaker: String,
    text: String,
    label: String,
}

struct Table {
    path: std::path::PathBuf,
    headers: Vec<String>,
    rows: Vec<(usize, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let text = String::from_utf8_lossy(&bytes);
        let text = text.trim_start_matches('\u{feff}');
        let mut reader = csv::ReaderBuilder::new()
            .flexible(true)
            .from_reader(text.as_bytes());
        let malformed = |line: usize, message: String| Error::Malformed {
            path: path.to_path_buf(),
            line,
            message,
        };
        let headers = reader
            .headers()
            .map_err(|e| malformed(1, e.to_string()))?
            .iter()
            .map(|h| h.trim().to_lowercase())
            .collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                malformed(line, e.to_string())
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            rows.push((line, rec));
        }
        Ok(Table {
            path: path.to_path_buf(),
            headers,
            rows,
        })
    }

    /// No header line at all, e.g. a zero-byte export.
    fn is_blank(&self) -> bool {
        self.headers.iter().all(|h| h.is_empty()) && self.rows.is_empty()
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Malformed {
                path: self.path.clone(),
                line: 1,
                message: format!("missing column {name:?}"),
            })
    }

    fn field<'a>(&self, rec: &'a csv::StringRecord, line: usize, col: usize) -> Result<&'a str> {
        rec.get(col).map(str::trim).ok_or_else(|| Error::Malformed {
            path: self.path.clone(),
            line,
            message: format!("missing field {:?}", self.headers[col]),
        })
    }

    fn integer(&self, rec: &csv::StringRecord, line: usize, col: usize) -> Result<u64> {
        let raw = self.field(rec, line, col)?;
        raw.parse().map_err(|_| Error::Malformed {
            path: self.path.clone(),
            line,
            message: format!("{:?} is not an integer: {raw:?}", self.headers[col]),
        })
    }
}

fn assemble(rows: Vec<Row>) -> Converted {
    let mut skipped_empty = 0;
    let mut grouped: BTreeMap<String, Vec<Row>> = BTreeMap::new();
    for row in rows {
        if row.text.trim().is_empty() {
            skipped_empty += 1;
            continue;
        }
        grouped.entry(row.conversation.clone()).or_default().push(row);
    }
    let mut records = Vec::new();
    for (conversation_id, mut turns) in grouped {
        turns.sort_by_key(|r| r.order);
        for (turn_index, row) in turns.into_iter().enumerate() {
            records.push(IngestRecord {
                conversation_id: conversation_id.clone(),
                turn_index,
                speaker: row.speaker,
                texts: [(GROUNDTRUTH.to_string(), row.text.trim().to_string())].into(),
                raw_label: Some(row.label).filter(|l| !l.is_empty()),
            });
        }
    }
    Converted {
        records,
        skipped_empty,
    }
}

/// MELD export: `Utterance, Speaker, Emotion, Dialogue_ID, Utterance_ID, ...`.
pub fn convert_meld_csv(path: &Path) -> Result<Converted> {
    let table = Table::read(path)?;
    if table.is_blank() {
        return Ok(Converted::default());
    }
    let (utt, spk, emo, dia, uid) = (
        table.column("utterance")?,
        table.column("speaker")?,
        table.column("emotion")?,
        table.column("dialogue_id")?,
        table.column("utterance_id")?,
    );
    let mut rows = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        rows.push(Row {
            conversation: format!("dia{:05}", table.integer(rec, *line, dia)?),
            order: table.integer(rec, *line, uid)?,
            speaker: table.field(rec, *line, spk)?.to_string(),
            text: table.field(rec, *line, utt)?.to_string(),
            label: table.field(rec, *line, emo)?.to_string(),
        });
    }
    Ok(assemble(rows))
}

/// EmoryNLP export: `Utterance, Speaker, Emotion, Scene_ID, Utterance_ID, Season, Episode, ...`.
///
/// Speakers arrive as Python list literals (`['Monica Geller']`); the
/// brackets and quotes are stripped.
pub fn convert_emorynlp_csv(path: &Path) -> Result<Converted> {
    let table = Table::read(path)?;
    if table.is_blank() {
        return Ok(Converted::default());
    }
    let (utt, spk, emo, scene, uid, season, episode) = (
        table.column("utterance")?,
        table.column("speaker")?,
        table.column("emotion")?,
        table.column("scene_id")?,
        table.column("utterance_id")?,
        table.column("season")?,
        table.column("episode")?,
    );
    let mut rows = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        let speaker = table
            .field(rec, *line, spk)?
            .trim_matches(|c| matches!(c, '[' | ']'))
            .split(',')
            .map(|s| s.trim().trim_matches(|c| c == '\'' || c == '"'))
            .collect::<Vec<_>>()
            .join(", ");
        rows.push(Row {
            conversation: format!(
                "s{:02}_e{:02}_c{:02}",
                table.integer(rec, *line, season)?,
                table.integer(rec, *line, episode)?,
                table.integer(rec, *line, scene)?
            ),
            order: table.integer(rec, *line, uid)?,
            speaker,
            text: table.field(rec, *line, utt)?.to_string(),
            label: table.field(rec, *line, emo)?.to_string(),
        });
    }
    Ok(assemble(rows))
}
