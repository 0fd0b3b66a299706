use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::EmotionLabel;
use crate::engine::ExperimentReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassDelta {
    pub label: EmotionLabel,
    pub f1_a: f64,
    pub f1_b: f64,
    pub delta: f64,
}

/// `b − a` metric differences plus per-target agreement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDelta {
    pub dataset: String,
    pub variant: String,
    pub label_a: String,
    pub label_b: String,
    pub per_class: [ClassDelta; 4],
    pub macro_f1_a: f64,
    pub macro_f1_b: f64,
    pub macro_delta: f64,
    /// Targets present in both reports.
    pub compared: usize,
    /// Share of compared targets with the same final label.
    pub agreement: f64,
}

fn describe(r: &ExperimentReport) -> String {
    format!("{}@{}", r.strategy, r.context_size)
}

pub fn compare_reports(a: &ExperimentReport, b: &ExperimentReport) -> Result<ReportDelta> {
    if a.dataset != b.dataset || a.variant != b.variant {
        return Err(Error::Incomparable(format!(
            "{}/{} vs {}/{}",
            a.dataset, a.variant, b.dataset, b.variant
        )));
    }
    let finals: HashMap<&str, EmotionLabel> = b.records.iter().map(|r| (r.target_id.as_str(), r.final_label)).collect();
    let mut compared = 0usize;
    let mut agreed = 0usize;
    for r in &a.records {
        if let Some(&other) = finals.get(r.target_id.as_str()) {
            compared += 1;
            agreed += usize::from(other == r.final_label);
        }
    }
    let agreement = if compared > 0 {
        agreed as f64 / compared as f64
    } else if a.records.is_empty() && b.records.is_empty() {
        1.0
    } else {
        return Err(Error::Incomparable("reports share no targets".into()));
    };
    let per_class = std::array::from_fn(|i| {
        let (ma, mb) = (a.per_class[i], b.per_class[i]);
        ClassDelta {
            label: ma.label,
            f1_a: ma.f1,
            f1_b: mb.f1,
            delta: mb.f1 - ma.f1,
        }
    });
    Ok(ReportDelta {
        dataset: a.dataset.clone(),
        variant: a.variant.clone(),
        label_a: describe(a),
        label_b: describe(b),
        per_class,
        macro_f1_a: a.macro_f1,
        macro_f1_b: b.macro_f1,
        macro_delta: b.macro_f1 - a.macro_f1,
        compared,
        agreement,
    })
}

impl ReportDelta {
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dataset {} variant {}: {} -> {}", self.dataset, self.variant, self.label_a, self.label_b);
        let _ = writeln!(out, "{:<10}  {:>7}  {:>7}  {:>7}", "metric", "a", "b", "delta");
        for d in &self.per_class {
            let _ = writeln!(out, "{:<10}  {:>7.3}  {:>7.3}  {:>+7.3}", format!("f1_{}", d.label), d.f1_a, d.f1_b, d.delta);
        }
        let _ = writeln!(
            out,
            "{:<10}  {:>7.3}  {:>7.3}  {:>+7.3}",
            "macro_f1", self.macro_f1_a, self.macro_f1_b, self.macro_delta
        );
        let _ = writeln!(out, "agreement {:.4} over {} targets", self.agreement, self.compared);
        out
    }
}
