use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::EmotionLabel;
use crate::error::{Error, Result};
use crate::evaluation::{ClassMetrics, ConfusionMatrix};
use crate::prompting::PromptStrategy;
use crate::reference::StoreProvenance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: usize,
    /// Absent when the prompt could not be rendered.
    pub prompt_hash: Option<String>,
    /// Verbatim model answer; absent on failure.
    pub response: Option<String>,
    pub label: EmotionLabel,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub target_id: String,
    pub gold: EmotionLabel,
    pub rounds: Vec<RoundRecord>,
    #[serde(rename = "final")]
    pub final_label: EmotionLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieved_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failure_flags: Vec<String>,
    /// False when more than half the rounds failed; such records stay out
    /// of the confusion matrix.
    pub valid: bool,
}

impl PredictionRecord {
    pub fn failed_rounds(&self) -> usize {
        self.rounds.iter().filter(|r| r.failed).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: serde_json::Value,
    pub config_hash: String,
    pub template_hash: String,
    pub llm_identity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedder_identity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub store: Option<StoreProvenance>,
    pub dataset: String,
    pub variant: String,
    pub strategy: PromptStrategy,
    pub context_size: usize,
    pub seed: u64,
    pub targets: usize,
    pub valid: usize,
    pub invalid: usize,
    pub failed_rounds: usize,
    pub confusion: ConfusionMatrix,
    pub per_class: [ClassMetrics<f64>; 4],
    pub macro_f1: f64,
    pub records: Vec<PredictionRecord>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Aligned human-readable table, one row per report. F1 values are rounded
/// to three decimals here only.
pub fn summary_table(reports: &[ExperimentReport]) -> String {
    let header = [
        "strategy", "dataset", "variant", "context", "macro_f1", "f1_happy", "f1_sad", "f1_neutral", "f1_angry", "invalid",
    ];
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![
                r.strategy.to_string(),
                r.dataset.clone(),
                r.variant.clone(),
                r.context_size.to_string(),
                format!("{:.3}", r.macro_f1),
            ];
            row.extend(r.per_class.iter().map(|m| format!("{:.3}", m.f1)));
            row.push(r.invalid.to_string());
            row
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(header.to_vec());
    for r in &rows {
        line(r.iter().map(String::as_str).collect());
    }
    out
}
