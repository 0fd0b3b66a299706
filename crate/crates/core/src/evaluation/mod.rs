//! Four-class confusion matrices, per-class precision/recall/F1, macro F1,
//! and report comparison.

mod compare;

use std::fmt::Write as _;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::corpus::EmotionLabel;
use crate::scalar::Scalar;

pub use compare::{compare_reports, ClassDelta, ReportDelta};

/// Rows are gold labels, columns predicted labels, both in declaration order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 4]; 4],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accumulate(&mut self, gold: EmotionLabel, pred: EmotionLabel) {
        self.counts[gold.index()][pred.index()] += 1;
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (EmotionLabel, EmotionLabel)>) -> Self {
        let mut cm = Self::new();
        for (g, p) in pairs {
            cm.accumulate(g, p);
        }
        cm
    }

    pub fn get(&self, gold: EmotionLabel, pred: EmotionLabel) -> u64 {
        self.counts[gold.index()][pred.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn true_positives(&self, label: EmotionLabel) -> u64 {
        self.counts[label.index()][label.index()]
    }

    /// Row sum: how many gold instances of `label`.
    pub fn support(&self, label: EmotionLabel) -> u64 {
        self.counts[label.index()].iter().sum()
    }

    /// Column sum: how often `label` was predicted.
    pub fn predicted(&self, label: EmotionLabel) -> u64 {
        self.counts.iter().map(|row| row[label.index()]).sum()
    }

    /// 4×4 comma-separated grid with a label-order header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gold\\pred");
        for l in EmotionLabel::ALL {
            out.push(',');
            out.push_str(l.as_str());
        }
        out.push('\n');
        for g in EmotionLabel::ALL {
            out.push_str(g.as_str());
            for p in EmotionLabel::ALL {
                let _ = write!(out, ",{}", self.get(g, p));
            }
            out.push('\n');
        }
        out
    }
}

impl Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(mut self, rhs: Self) -> Self {
        for (row, other) in self.counts.iter_mut().zip(rhs.counts) {
            for (c, o) in row.iter_mut().zip(other) {
                *c += o;
            }
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics<T> {
    pub label: EmotionLabel,
    pub precision: T,
    pub recall: T,
    pub f1: T,
    pub support: u64,
}

fn ratio<T: Scalar>(num: u64, den: u64) -> T {
    if den == 0 {
        T::zero()
    } else {
        T::narrow(num as f64) / T::narrow(den as f64)
    }
}

/// Precision, recall, and F1 per label; any zero denominator yields 0.
pub fn per_class_metrics<T: Scalar>(cm: &ConfusionMatrix) -> [ClassMetrics<T>; 4] {
    EmotionLabel::ALL.map(|label| {
        let tp = cm.true_positives(label);
        let precision: T = ratio(tp, cm.predicted(label));
        let recall: T = ratio(tp, cm.support(label));
        let denom = precision + recall;
        let f1 = if denom > T::zero() {
            T::narrow(2.0) * precision * recall / denom
        } else {
            T::zero()
        };
        ClassMetrics {
            label,
            precision,
            recall,
            f1,
            support: cm.support(label),
        }
    })
}

/// Unweighted mean of the four per-class F1 values.
pub fn macro_f1<T: Scalar>(cm: &ConfusionMatrix) -> T {
    let sum = per_class_metrics::<T>(cm).iter().fold(T::zero(), |acc, m| acc + m.f1);
    sum / T::narrow(4.0)
}
