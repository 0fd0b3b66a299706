#![allow(dead_code)]

use std::path::{Path, PathBuf};

use aerkit::corpus::{load_dataset, LabelScheme};
use aerkit::engine::{EmbedderConfig, ExperimentConfig, LlmConfig, TransportConfig};
use aerkit::prompting::PromptStrategy;
use aerkit::reference::{build_reference_store, BuildOptions};
use aerkit::{cache::ContentCache, ReferenceStore};

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// Eight examples, two per emotion, paraphrased by the rewrite mock and
/// embedded with the default mock embedder.
pub fn fixture_store() -> ReferenceStore {
    let splits = [
        load_dataset(&data("ref_meld.jsonl"), LabelScheme::meld()).unwrap(),
        load_dataset(&data("ref_emorynlp.jsonl"), LabelScheme::emorynlp()).unwrap(),
    ];
    let llm = LlmConfig::with_transport(TransportConfig::Paraphrase).build(None).unwrap();
    let embedder = EmbedderConfig::default().build(None).unwrap();
    let (store, _) =
        build_reference_store(&splits, &embedder, &llm, &ContentCache::in_memory(), &BuildOptions::default()).unwrap();
    store
}

/// Config for the 12-target fixture, answered by the scripted mock at `script`.
pub fn targets_config(strategy: PromptStrategy, script: &Path, store: Option<&Path>) -> ExperimentConfig {
    let mut llm = LlmConfig::with_transport(TransportConfig::Scripted {
        script: script.to_path_buf(),
    });
    llm.retry_budget = 0;
    ExperimentConfig {
        dataset: data("targets12.jsonl"),
        scheme: "meld".into(),
        variant: "groundtruth".into(),
        strategy,
        context_size: None,
        store: store.map(Path::to_path_buf),
        store_sources: None,
        seed: 42,
        limit: None,
        template: None,
        aer_round_order: Default::default(),
        random_pool: Default::default(),
        synonyms: None,
        llm,
        embedder: EmbedderConfig::default(),
        workers: 4,
        cache_dir: None,
    }
}

/// Frozen prompt fixture: the sixth turn of `dia00001` with three context
/// turns and a hand-written slate. Returns `(file name, rendered text)` for
/// each strategy plus the five AER rounds.
pub fn golden_prompts() -> (Vec<(String, String)>, Vec<String>) {
    use aerkit::corpus::GROUNDTRUTH;
    use aerkit::prompting::{render_prompt, round_display_text, AerRoundOrder, ExampleSlate, PromptTemplate, SlateEntry};

    let split = load_dataset(&data("twelve_turns.jsonl"), LabelScheme::meld()).unwrap();
    let target = &split.conversation("dia00001").unwrap().utterances[5];
    let context = aerkit::corpus::context_window(&split, target, 3, GROUNDTRUTH).unwrap();
    let template = PromptTemplate::default();
    let entry = |id: &str, text: &str| SlateEntry {
        example_id: id.into(),
        display_text: text.into(),
    };
    let random = ExampleSlate::new(
        [
            entry("m/1", "I just got promoted!"),
            entry("m/2", "My dog ran away last night."),
            entry("m/3", "The bus comes at nine."),
            entry("m/4", "Stop touching my stuff!"),
        ],
        None,
    )
    .unwrap();
    let retrieved = aerkit::ReferenceExample {
        id: "e/2".into(),
        source: "e".into(),
        text: "Nobody came to my party.".into(),
        label: aerkit::corpus::EmotionLabel::Sad,
        paraphrases: aerkit::llm::ParaphraseMock::rewrites("Nobody came to my party."),
        embedding: aerkit::EmbeddingVector::normalized(&[1.0f64, 0.0]).unwrap(),
    };
    let aer = ExampleSlate::new(
        [
            entry("m/1", "I just got promoted!"),
            entry("e/2", &retrieved.text),
            entry("m/3", "The bus comes at nine."),
            entry("e/4", "You broke it again, didn't you?"),
        ],
        Some(retrieved.label),
    )
    .unwrap();
    let show = |p: aerkit::prompting::RenderedPrompt| format!("[system]\n{}\n[user]\n{}\n", p.system_text, p.user_text);
    let render = |strategy, ctx: &[aerkit::corpus::ContextLine], slate: Option<&ExampleSlate>, round| {
        show(render_prompt(&template, strategy, target, GROUNDTRUTH, ctx, slate, round).unwrap())
    };
    let aer_rounds: Vec<String> = (0..5)
        .map(|round| {
            let text = round_display_text(&retrieved, round, AerRoundOrder::OriginalFirst).unwrap();
            let slate = aer.with_display(retrieved.label, text);
            render(PromptStrategy::IclAer, &context, Some(&slate), round)
        })
        .collect();
    let cases = vec![
        ("zero-shot.txt".to_string(), render(PromptStrategy::ZeroShot, &[], None, 0)),
        ("zero-shot-context.txt".to_string(), render(PromptStrategy::ZeroShotContext, &context, None, 0)),
        ("icl-random.txt".to_string(), render(PromptStrategy::IclRandom, &context, Some(&random), 0)),
        ("icl-aer.txt".to_string(), aer_rounds[0].clone()),
    ];
    (cases, aer_rounds)
}
