//! Example-slate selection (random or retrieval-based) and byte-stable
//! prompt rendering for the four prompting strategies.

mod slate;
mod template;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{ContextLine, Utterance};
use crate::error::{Error, Result};
use crate::hashing::digest_parts;

pub use slate::{
    round_display_text, select_aer_slate, select_random_slate, AerRoundOrder, AerSelection, ExampleSlate,
    RandomPool, SlateEntry, AER_ROUNDS,
};
pub use template::{PromptTemplate, DEFAULT_TEMPLATE_TOML};

pub(crate) use template::{one_line, substitute};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptStrategy {
    /// Target utterance only. Same as `ZeroShotContext` with zero context.
    ZeroShot,
    ZeroShotContext,
    IclRandom,
    IclAer,
}

impl PromptStrategy {
    pub const ALL: [PromptStrategy; 4] = [
        PromptStrategy::ZeroShot,
        PromptStrategy::ZeroShotContext,
        PromptStrategy::IclRandom,
        PromptStrategy::IclAer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PromptStrategy::ZeroShot => "zero-shot",
            PromptStrategy::ZeroShotContext => "zero-shot-context",
            PromptStrategy::IclRandom => "icl-random",
            PromptStrategy::IclAer => "icl-aer",
        }
    }

    pub fn uses_slate(self) -> bool {
        matches!(self, PromptStrategy::IclRandom | PromptStrategy::IclAer)
    }

    pub fn rounds(self) -> usize {
        if self == PromptStrategy::IclAer {
            AER_ROUNDS
        } else {
            1
        }
    }
}

impl fmt::Display for PromptStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PromptStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PromptStrategy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub system_text: String,
    pub user_text: String,
    pub strategy: PromptStrategy,
    pub round_index: usize,
}

impl RenderedPrompt {
    /// `hash(system ‖ user)`; strategy and round are not part of it.
    pub fn hash(&self) -> String {
        digest_parts([&self.system_text, &self.user_text])
    }
}

/// Renders one prompt. Pure: identical inputs give identical bytes.
///
/// The user message is built from up to three blank-line separated blocks:
/// conversation context (when non-empty), examples in happy/sad/neutral/angry
/// order (ICL strategies), and the target line.
pub fn render_prompt(
    template: &PromptTemplate,
    strategy: PromptStrategy,
    target: &Utterance,
    variant: &str,
    context: &[ContextLine],
    slate: Option<&ExampleSlate>,
    round_index: usize,
) -> Result<RenderedPrompt> {
    match (strategy.uses_slate(), slate.is_some()) {
        (true, false) => return Err(Error::MissingSlate(strategy.name())),
        (false, true) => return Err(Error::UnexpectedSlate(strategy.name())),
        _ => {}
    }
    if round_index >= strategy.rounds() {
        return Err(Error::RoundOutOfRange(round_index));
    }
    if strategy == PromptStrategy::ZeroShot && !context.is_empty() {
        return Err(Error::Config("zero-shot prompts take no conversation context".into()));
    }
    let text = target
        .texts
        .get(variant)
        .ok_or_else(|| Error::UnknownVariant(variant.to_string()))?;

    let mut blocks: Vec<String> = Vec::with_capacity(3);
    if !context.is_empty() {
        let mut lines = vec![template.context_header.clone()];
        lines.extend(context.iter().map(|c| {
            substitute(
                &template.context_line,
                &[("speaker", &one_line(&c.speaker)), ("text", &one_line(&c.text))],
            )
        }));
        blocks.push(lines.join("\n"));
    }
    if let Some(slate) = slate {
        let mut lines = vec![template.examples_header.clone()];
        lines.extend(slate.iter().map(|(label, entry)| {
            substitute(
                &template.example_line,
                &[("text", &one_line(&entry.display_text)), ("label", label.as_str())],
            )
        }));
        blocks.push(lines.join("\n"));
    }
    blocks.push(substitute(
        &template.target_line,
        &[("speaker", &one_line(&target.speaker)), ("text", &one_line(text))],
    ));

    Ok(RenderedPrompt {
        system_text: template.system.clone(),
        user_text: blocks.join("\n\n"),
        strategy,
        round_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EmotionLabel, GROUNDTRUTH};

    fn target() -> Utterance {
        Utterance {
            conversation_id: "c".into(),
            turn_index: 2,
            speaker: "Ross".into(),
            texts: [
                (GROUNDTRUTH.to_string(), "We were on a break!".to_string()),
                ("whispertiny".to_string(), "we were on a brake".to_string()),
            ]
            .into(),
            raw_label: Some("anger".into()),
            mapped_label: Some(EmotionLabel::Angry),
        }
    }

    fn slate() -> ExampleSlate {
        let slots = EmotionLabel::ALL.map(|l| SlateEntry {
            example_id: format!("ex-{l}"),
            display_text: format!("an example that is {l}"),
        });
        ExampleSlate::new(slots, None).unwrap()
    }

    #[test]
    fn minimal_zero_shot() {
        let p = render_prompt(&PromptTemplate::default(), PromptStrategy::ZeroShot, &target(), GROUNDTRUTH, &[], None, 0).unwrap();
        assert_eq!(p.user_text, "Target utterance: Ross: We were on a break!");
        assert!(p.system_text.starts_with("You are an expert"));
    }

    #[test]
    fn variant_text_is_used() {
        let p = render_prompt(&PromptTemplate::default(), PromptStrategy::ZeroShot, &target(), "whispertiny", &[], None, 0).unwrap();
        assert!(p.user_text.ends_with("we were on a brake"));
        assert!(matches!(
            render_prompt(&PromptTemplate::default(), PromptStrategy::ZeroShot, &target(), "w2v2100", &[], None, 0),
            Err(Error::UnknownVariant(_))
        ));
    }

    #[test]
    fn slate_presence_enforced() {
        let t = PromptTemplate::default();
        assert!(matches!(
            render_prompt(&t, PromptStrategy::IclRandom, &target(), GROUNDTRUTH, &[], None, 0),
            Err(Error::MissingSlate("icl-random"))
        ));
        assert!(matches!(
            render_prompt(&t, PromptStrategy::ZeroShotContext, &target(), GROUNDTRUTH, &[], Some(&slate()), 0),
            Err(Error::UnexpectedSlate(_))
        ));
        assert!(matches!(
            render_prompt(&t, PromptStrategy::IclRandom, &target(), GROUNDTRUTH, &[], Some(&slate()), 1),
            Err(Error::RoundOutOfRange(1))
        ));
        assert!(matches!(
            render_prompt(&t, PromptStrategy::IclAer, &target(), GROUNDTRUTH, &[], Some(&slate()), 5),
            Err(Error::RoundOutOfRange(5))
        ));
    }

    #[test]
    fn blocks_in_order() {
        let ctx = vec![
            ContextLine { speaker: "Rachel".into(), text: "Ross,\nstop.".into() },
            ContextLine { speaker: "Ross".into(), text: "No.".into() },
        ];
        let p = render_prompt(&PromptTemplate::default(), PromptStrategy::IclRandom, &target(), GROUNDTRUTH, &ctx, Some(&slate()), 0).unwrap();
        let expected = "Conversation context:\nRachel: Ross, stop.\nRoss: No.\n\n\
Examples:\n\
Utterance: \"an example that is happy\" -> Emotion: happy\n\
Utterance: \"an example that is sad\" -> Emotion: sad\n\
Utterance: \"an example that is neutral\" -> Emotion: neutral\n\
Utterance: \"an example that is angry\" -> Emotion: angry\n\n\
Target utterance: Ross: We were on a break!";
        assert_eq!(p.user_text, expected);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in PromptStrategy::ALL {
            assert_eq!(s.name().parse::<PromptStrategy>().unwrap(), s);
        }
    }
}
