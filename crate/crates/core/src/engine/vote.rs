use crate::corpus::EmotionLabel;

/// Most frequent label. Among tied leaders `preferred` wins if present,
/// otherwise the earliest in declaration order. Empty input yields `preferred`.
///
/// For AER, `preferred` is the label from the round that showed the
/// unparaphrased retrieved example.
pub fn majority_vote(labels: &[EmotionLabel], preferred: EmotionLabel) -> EmotionLabel {
    let mut counts = [0usize; 4];
    for l in labels {
        counts[l.index()] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0);
    if top == 0 || counts[preferred.index()] == top {
        return preferred;
    }
    EmotionLabel::ALL
        .into_iter()
        .find(|l| counts[l.index()] == top)
        .expect("some label reaches the maximum")
}
