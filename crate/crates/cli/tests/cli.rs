use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name)
}

fn aerkit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aerkit"))
        .args(args)
        .current_dir(dir)
        .env_remove("AERKIT_MOCK")
        .env_remove("AERKIT_CACHE_DIR")
        .env_remove("AERKIT_LLM_URL")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn store_config(dir: &Path, splits: &[(&str, &str)]) -> PathBuf {
    let mut text = String::from("out = \"store.jsonl\"\n\n[llm]\nkind = \"paraphrase\"\n");
    for (file, scheme) in splits {
        text.push_str(&format!("\n[[splits]]\npath = {:?}\nscheme = \"{scheme}\"\n", data(file)));
    }
    let path = dir.join("store.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn experiment_config(dir: &Path) -> PathBuf {
    let text = format!(
        "dataset = {:?}\nscheme = \"meld\"\nstrategy = \"icl-aer\"\nstore = \"store.jsonl\"\n\n[llm]\nkind = \"openai\"\nmodel = \"llama\"\n",
        data("targets12.jsonl")
    );
    let path = dir.join("exp.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn with_store(dir: &Path) {
    let cfg = store_config(dir, &[("ref_meld.jsonl", "meld"), ("ref_emorynlp.jsonl", "emorynlp")]);
    stdout(&aerkit(dir, &["build-store", "--config", cfg.to_str().unwrap()]));
}

fn field(out: &str, key: &str) -> String {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}\t")))
        .unwrap_or_else(|| panic!("no {key} in {out}"))
        .to_string()
}

#[test]
fn ingest_prints_label_counts() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("dev.csv");
    std::fs::write(
        &csv,
        "Utterance,Speaker,Emotion,Dialogue_ID,Utterance_ID\nHi!,A,joy,0,0\nNo.,B,anger,0,1\nOh?,A,surprise,0,2\nOk.,B,neutral,1,0\n",
    )
    .unwrap();
    let out = stdout(&aerkit(
        dir.path(),
        &["ingest", "--input", "dev.csv", "--format", "meld-csv", "--scheme", "meld", "--out", "dev.jsonl"],
    ));
    assert_eq!(out, "happy\t1\nsad\t0\nneutral\t1\nangry\t1\ntotal\t3\ncontext_only\t1\nskipped_empty\t0\n");
    let written = std::fs::read_to_string(dir.path().join("dev.jsonl")).unwrap();
    assert_eq!(written.lines().count(), 4);
}

#[test]
fn empty_input_ingests_to_zero_counts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    let out = stdout(&aerkit(
        dir.path(),
        &["ingest", "--input", "empty.csv", "--format", "emorynlp-csv", "--scheme", "emorynlp", "--out", "e.jsonl"],
    ));
    assert_eq!(field(&out, "total"), "0");
}

#[test]
fn malformed_jsonl_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let good = std::fs::read_to_string(data("targets12.jsonl")).unwrap();
    let first = good.lines().next().unwrap();
    std::fs::write(dir.path().join("bad.jsonl"), format!("{first}\n{{not json\n")).unwrap();
    let o = aerkit(dir.path(), &["ingest", "--input", "bad.jsonl", "--scheme", "meld", "--out", "x.jsonl"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.jsonl:2:"), "{err}");
}

#[test]
fn build_store_and_warm_rebuild() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = store_config(dir.path(), &[("ref_meld.jsonl", "meld"), ("ref_emorynlp.jsonl", "emorynlp")]);
    let cfg = cfg.to_str().unwrap();
    let cold = stdout(&aerkit(dir.path(), &["build-store", "--config", cfg, "--cache-dir", "cache"]));
    for label in ["happy", "sad", "neutral", "angry"] {
        assert_eq!(field(&cold, label), "2");
    }
    assert_eq!(field(&cold, "total"), "8");
    let first = std::fs::read(dir.path().join("store.jsonl")).unwrap();
    let header: serde_json::Value = serde_json::from_slice(first.split(|&b| b == b'\n').next().unwrap()).unwrap();
    assert_eq!(header["config_hash"].as_str().unwrap().len(), 64);

    let warm = stdout(&aerkit(dir.path(), &["build-store", "--config", cfg, "--cache-dir", "cache"]));
    assert_eq!(field(&warm, "llm_calls"), "0");
    assert_eq!(field(&warm, "embedding_backend_calls"), "0");
    assert_eq!(std::fs::read(dir.path().join("store.jsonl")).unwrap(), first);
}

#[test]
fn build_store_names_the_empty_bucket() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = store_config(dir.path(), &[("ref_no_sad.jsonl", "meld")]);
    let o = aerkit(dir.path(), &["build-store", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("sad"));
}

#[test]
fn run_writes_report_and_prints_macro_f1() {
    let dir = tempfile::tempdir().unwrap();
    with_store(dir.path());
    let cfg = experiment_config(dir.path());
    let script = format!("scripted:{}", data("gold_script.json").display());
    let args = ["run", "--config", cfg.to_str().unwrap(), "--mock", &script, "--out", "r.json"];
    let out = stdout(&aerkit(dir.path(), &args));
    assert_eq!(field(&out, "macro_f1"), "1");
    let first = std::fs::read(dir.path().join("r.json")).unwrap();
    let report: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["targets"], 12);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(report["config"]["seed"], 42);

    stdout(&aerkit(dir.path(), &args));
    assert_eq!(std::fs::read(dir.path().join("r.json")).unwrap(), first);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    with_store(dir.path());
    let cfg = experiment_config(dir.path());
    let out = stdout(&aerkit(
        dir.path(),
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--mock",
            "constant:happy",
            "--strategy",
            "icl-random",
            "--limit",
            "4",
            "--seed",
            "7",
            "--set",
            "workers=1",
            "--out",
            "r.json",
        ],
    ));
    assert!(out.contains("icl-random"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["targets"], 4);
    assert_eq!(report["seed"], 7);
    assert_eq!(report["llm_identity"], "mock-constant:happy");
}

#[test]
fn per_target_failures_keep_exit_status_zero() {
    let dir = tempfile::tempdir().unwrap();
    with_store(dir.path());
    let cfg = experiment_config(dir.path());
    std::fs::write(dir.path().join("silent.json"), "{}").unwrap();
    let out = stdout(&aerkit(
        dir.path(),
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--mock",
            "scripted:silent.json",
            "--set",
            "llm.retry_budget=0",
            "--out",
            "r.json",
        ],
    ));
    assert_eq!(field(&out, "macro_f1"), "0");
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["invalid"], 12);
}

#[test]
fn fatal_config_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = experiment_config(dir.path());
    let o = aerkit(dir.path(), &["run", "--config", cfg.to_str().unwrap(), "--mock", "constant:happy"]);
    assert!(!o.status.success(), "missing store should be fatal");
    let o = aerkit(dir.path(), &["run", "--config", cfg.to_str().unwrap(), "--set", "bogus"]);
    assert!(!o.status.success());
}

#[test]
fn sweep_prints_five_rows_and_report_compare_work() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = experiment_config(dir.path());
    let script = format!("scripted:{}", data("gold_script.json").display());
    let table = stdout(&aerkit(
        dir.path(),
        &["sweep-context", "--config", cfg.to_str().unwrap(), "--mock", &script, "--out-dir", "sweep"],
    ));
    assert_eq!(table.lines().count(), 6);
    let contexts: Vec<&str> = table.lines().skip(1).map(|l| l.split_whitespace().nth(3).unwrap()).collect();
    assert_eq!(contexts, ["0", "5", "10", "15", "20"]);

    let k5 = "sweep/targets12.zero-shot-context.groundtruth.k5.json";
    let summary = stdout(&aerkit(dir.path(), &["report", k5, "--csv", "summary.csv", "--confusion"]));
    assert!(summary.contains("gold\\pred,happy,sad,neutral,angry"));
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);

    let delta = stdout(&aerkit(dir.path(), &["compare", k5, k5, "--json"]));
    let delta: serde_json::Value = serde_json::from_str(&delta).unwrap();
    assert_eq!(delta["agreement"], 1.0);
    assert_eq!(delta["macro_delta"], 0.0);
    assert!(delta["per_class"].as_array().unwrap().iter().all(|d| d["delta"] == 0.0));
}
