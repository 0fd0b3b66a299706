use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::EmotionLabel;
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::reference::{ReferenceExample, ReferenceStore};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlateEntry {
    pub example_id: String,
    pub display_text: String,
}

/// Four in-context examples, one per emotion, indexed in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleSlate {
    slots: [SlateEntry; 4],
    retrieved_label: Option<EmotionLabel>,
}

impl ExampleSlate {
    pub fn new(slots: [SlateEntry; 4], retrieved_label: Option<EmotionLabel>) -> Result<Self> {
        if let Some(e) = slots.iter().find(|e| e.display_text.trim().is_empty()) {
            return Err(Error::Config(format!("slate entry {} has empty text", e.example_id)));
        }
        Ok(ExampleSlate {
            slots,
            retrieved_label,
        })
    }

    pub fn slot(&self, label: EmotionLabel) -> &SlateEntry {
        &self.slots[label.index()]
    }

    /// Slots in fixed label order.
    pub fn iter(&self) -> impl Iterator<Item = (EmotionLabel, &SlateEntry)> {
        EmotionLabel::ALL.into_iter().zip(self.slots.iter())
    }

    pub fn retrieved_label(&self) -> Option<EmotionLabel> {
        self.retrieved_label
    }

    /// Copy with one slot's display text replaced.
    pub fn with_display(&self, label: EmotionLabel, text: impl Into<String>) -> Self {
        let mut next = self.clone();
        next.slots[label.index()].display_text = text.into();
        next
    }
}

/// Which texts an ICL-random slate may display.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomPool {
    /// Reference originals only.
    #[default]
    Originals,
    /// Originals and their paraphrases, each equally likely.
    WithParaphrases,
}

/// Which AER round shows the unparaphrased retrieved example.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AerRoundOrder {
    /// Round 0 original, rounds 1..=4 paraphrases 0..=3.
    #[default]
    OriginalFirst,
    /// Rounds 0..=3 paraphrases 0..=3, round 4 original.
    OriginalLast,
}

impl AerRoundOrder {
    /// Round whose prompt carries the original text.
    pub fn original_round(self) -> usize {
        match self {
            AerRoundOrder::OriginalFirst => 0,
            AerRoundOrder::OriginalLast => 4,
        }
    }
}

pub const AER_ROUNDS: usize = 5;

/// Text shown for the retrieved example in `round_index`.
pub fn round_display_text<T>(retrieved: &ReferenceExample<T>, round_index: usize, order: AerRoundOrder) -> Result<&str> {
    if round_index >= AER_ROUNDS {
        return Err(Error::RoundOutOfRange(round_index));
    }
    let text = match order {
        AerRoundOrder::OriginalFirst if round_index == 0 => &retrieved.text,
        AerRoundOrder::OriginalFirst => &retrieved.paraphrases[round_index - 1],
        AerRoundOrder::OriginalLast if round_index == 4 => &retrieved.text,
        AerRoundOrder::OriginalLast => &retrieved.paraphrases[round_index],
    };
    Ok(text)
}

fn draw<'s, T: Scalar, R: Rng + ?Sized>(
    store: &'s ReferenceStore<T>,
    label: EmotionLabel,
    exclude: Option<usize>,
    rng: &mut R,
) -> Result<&'s ReferenceExample<T>> {
    let bucket = store.bucket(label);
    let skip = exclude.and_then(|x| bucket.iter().position(|&p| p == x));
    let eligible = bucket.len() - usize::from(skip.is_some());
    if eligible == 0 {
        return Err(Error::EmptyBucket(label));
    }
    let mut i = rng.random_range(0..eligible);
    if skip.is_some_and(|s| i >= s) {
        i += 1;
    }
    Ok(store.example_at(bucket[i]))
}

/// One uniform draw per emotion bucket, in label order.
pub fn select_random_slate<T: Scalar, R: Rng + ?Sized>(
    store: &ReferenceStore<T>,
    rng: &mut R,
    pool: RandomPool,
) -> Result<ExampleSlate> {
    let mut slots = Vec::with_capacity(4);
    for label in EmotionLabel::ALL {
        let ex = draw(store, label, None, rng)?;
        let display_text = match pool {
            RandomPool::Originals => ex.text.clone(),
            RandomPool::WithParaphrases => match rng.random_range(0..5) {
                0 => ex.text.clone(),
                i => ex.paraphrases[i - 1].clone(),
            },
        };
        slots.push(SlateEntry {
            example_id: ex.id.clone(),
            display_text,
        });
    }
    ExampleSlate::new(slots.try_into().expect("four labels"), None)
}

#[derive(Debug, Clone)]
pub struct AerSelection<'s, T> {
    pub slate: ExampleSlate,
    pub retrieved: &'s ReferenceExample<T>,
    pub score: f64,
}

/// Retrieves the most similar reference example and fills the other three
/// emotions with uniform draws. The retrieved slot shows the original text;
/// callers swap in per-round text with [`ExampleSlate::with_display`].
pub fn select_aer_slate<'s, T: Scalar, R: Rng + ?Sized>(
    store: &'s ReferenceStore<T>,
    target_vec: &Embedding<T>,
    rng: &mut R,
) -> Result<AerSelection<'s, T>> {
    for label in EmotionLabel::ALL {
        if store.bucket(label).is_empty() {
            return Err(Error::EmptyBucket(label));
        }
    }
    let hit = store.index().top1(target_vec)?;
    let retrieved = store.example_at(hit.position);
    let mut slots = Vec::with_capacity(4);
    for label in EmotionLabel::ALL {
        let ex = if label == retrieved.label {
            retrieved
        } else {
            draw(store, label, Some(hit.position), rng)?
        };
        slots.push(SlateEntry {
            example_id: ex.id.clone(),
            display_text: ex.text.clone(),
        });
    }
    Ok(AerSelection {
        slate: ExampleSlate::new(slots.try_into().expect("four labels"), Some(retrieved.label))?,
        retrieved,
        score: hit.score,
    })
}
