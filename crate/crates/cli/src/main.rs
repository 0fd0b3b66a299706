mod overrides;

use std::fmt::Write as _;
use std::io::{IsTerminal, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aerkit::cache::ContentCache;
use aerkit::corpus::{ingest_file, predictable_targets, EmotionLabel, LabelScheme, SourceFormat};
use aerkit::engine::{summary_table, sweep_context, Experiment, ExperimentConfig, ExperimentReport, StoreBuildConfig, StoreScalar};
use aerkit::evaluation::compare_reports;
use aerkit::prompting::PromptStrategy;
use aerkit::reference::{build_reference_store, save_store, BuildOptions, ParaphrasePrompt};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};
use tracing_subscriber::EnvFilter;

/// Conversational emotion recognition with LLM prompting and augmented example retrieval.
#[derive(Parser)]
#[command(name = "aerkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a dataset export to canonical JSONL and print label counts.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "jsonl")]
        format: SourceFormat,
        /// Builtin scheme (meld, emorynlp, iemocap) or a scheme file.
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Paraphrase and embed training splits into a reference store.
    BuildStore {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run one experiment and write its report.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Report path; defaults to a name derived from the run under --out-dir.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "reports")]
        out_dir: PathBuf,
    },
    /// Zero-shot runs over several context sizes, one report each.
    SweepContext {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,5,10,15,20")]
        sizes: Vec<usize>,
        #[arg(long, default_value = "reports")]
        out_dir: PathBuf,
    },
    /// Summarize report files as an aligned table.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Also write the summary as CSV (full precision).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Print each confusion matrix.
        #[arg(long)]
        confusion: bool,
    },
    /// Per-class and macro F1 deltas (b - a) and per-target agreement.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted TOML override, e.g. `llm.temperature=0.2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// OpenAI-compatible chat endpoint base URL.
    #[arg(long)]
    backend_url: Option<String>,
    /// OpenAI-compatible embeddings URL.
    #[arg(long)]
    embedder_url: Option<String>,
    /// constant:LABEL, scripted:PATH, or paraphrase.
    #[arg(long, env = "AERKIT_MOCK")]
    mock: Option<String>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    base: ConfigArgs,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    strategy: Option<PromptStrategy>,
    #[arg(long)]
    context_size: Option<usize>,
}

impl ConfigArgs {
    fn table(&self) -> Result<Table> {
        let mut t = overrides::load_table(self.config.as_deref())?;
        for s in &self.set {
            overrides::apply_set(&mut t, s)?;
        }
        if let Some(dir) = &self.cache_dir {
            overrides::set_path(&mut t, "cache_dir", path_value(dir))?;
        }
        if let Some(url) = &self.backend_url {
            overrides::set_path(&mut t, "llm.base_url", url.as_str().into())?;
            default_kind(&mut t, "llm", "openai")?;
        }
        if let Some(url) = &self.embedder_url {
            overrides::set_path(&mut t, "embedder.url", url.as_str().into())?;
            default_kind(&mut t, "embedder", "remote")?;
        }
        if let Some(spec) = &self.mock {
            overrides::apply_mock(&mut t, spec)?;
        }
        Ok(t)
    }
}

impl ExperimentArgs {
    fn config(&self, forced_strategy: Option<PromptStrategy>) -> Result<ExperimentConfig> {
        let mut t = self.base.table()?;
        if let Some(n) = self.limit {
            overrides::set_path(&mut t, "limit", Value::Integer(n as i64))?;
        }
        if let Some(s) = self.seed {
            let s = i64::try_from(s).context("--seed must fit in a signed 64-bit integer")?;
            overrides::set_path(&mut t, "seed", Value::Integer(s))?;
        }
        if let Some(v) = &self.variant {
            overrides::set_path(&mut t, "variant", v.as_str().into())?;
        }
        if let Some(s) = self.strategy.or(forced_strategy) {
            overrides::set_path(&mut t, "strategy", s.name().into())?;
        }
        if let Some(k) = self.context_size {
            overrides::set_path(&mut t, "context_size", Value::Integer(k as i64))?;
        }
        Value::Table(t).try_into().context("invalid experiment config")
    }
}

fn path_value(p: &Path) -> Value {
    Value::String(p.to_string_lossy().into_owned())
}

fn default_kind(t: &mut Table, section: &str, kind: &str) -> Result<()> {
    let has_kind = t
        .get(section)
        .and_then(Value::as_table)
        .is_some_and(|s| s.contains_key("kind"));
    if !has_kind {
        overrides::set_path(t, &format!("{section}.kind"), kind.into())?;
    }
    Ok(())
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other.context("writing to stdout"),
    }
}

fn counts_text(counts: [usize; 4], extra: &[(&str, usize)]) -> String {
    let mut out = String::new();
    for label in EmotionLabel::ALL {
        let _ = writeln!(out, "{label}\t{}", counts[label.index()]);
    }
    let _ = writeln!(out, "total\t{}", counts.iter().sum::<usize>());
    for (name, n) in extra {
        let _ = writeln!(out, "{name}\t{n}");
    }
    out
}

fn cmd_ingest(input: &Path, format: SourceFormat, scheme: &str, out: &Path) -> Result<()> {
    let scheme = LabelScheme::resolve(scheme)?;
    let (split, skipped) = ingest_file(input, format, scheme)?;
    split.write_jsonl(out)?;
    let context_only = split.len() - predictable_targets(&split).len();
    tracing::info!(utterances = split.len(), out = %out.display(), "wrote canonical dataset");
    emit(&counts_text(
        split.label_counts(),
        &[("context_only", context_only), ("skipped_empty", skipped)],
    ))
}

fn cmd_build_store(args: &ConfigArgs) -> Result<()> {
    let config: StoreBuildConfig = Value::Table(args.table()?).try_into().context("invalid store config")?;
    let cache_root = config.cache_root();
    let mut splits = Vec::with_capacity(config.splits.len());
    for s in &config.splits {
        let (split, _) = ingest_file(&s.path, s.format, LabelScheme::resolve(&s.scheme)?)
            .with_context(|| format!("loading {}", s.path.display()))?;
        tracing::info!(split = %split.name, utterances = split.len(), "loaded training split");
        splits.push(split);
    }
    let llm = config.llm.build(cache_root.as_deref())?;
    let embedder = config.embedder.build(cache_root.as_deref())?;
    let paraphrase_cache = ContentCache::open(cache_root.as_deref(), "paraphrases")?;
    let options = BuildOptions {
        paraphrase_prompt: match &config.paraphrase_prompt {
            Some(p) => ParaphrasePrompt::from_file(p)?,
            None => ParaphrasePrompt::default(),
        },
        workers: config.workers,
        sources: config.sources.clone(),
    };
    let (mut store, stats) = build_reference_store::<StoreScalar>(&splits, &embedder, &llm, &paraphrase_cache, &options)?;
    store.set_config_hash(Some(config.provenance_hash()));
    save_store(&store, &config.out)?;
    tracing::info!(out = %config.out.display(), "wrote reference store");
    emit(&counts_text(
        stats.bucket_sizes,
        &[
            ("paraphrase_cache_hits", stats.paraphrase_cache_hits),
            ("paraphrases_generated", stats.paraphrases_generated),
            ("paraphrases_padded", stats.padded),
            ("paraphrase_fallbacks", stats.fallbacks),
            ("llm_calls", stats.llm_calls as usize),
            ("embedding_cache_hits", stats.embedding_cache_hits as usize),
            ("embedding_backend_calls", stats.embedding_backend_calls as usize),
        ],
    ))
}

fn report_name(r: &ExperimentReport) -> String {
    format!("{}.{}.{}.k{}.json", r.dataset, r.strategy, r.variant, r.context_size)
}

fn write_report(report: &ExperimentReport, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    report.write(path)?;
    tracing::info!(path = %path.display(), "wrote report");
    Ok(())
}

fn log_failures(report: &ExperimentReport) {
    if report.failed_rounds > 0 {
        tracing::warn!(
            failed_rounds = report.failed_rounds,
            invalid = report.invalid,
            "some rounds failed; see failure_flags in the report"
        );
    }
}

fn cmd_run(exp: &ExperimentArgs, out: Option<&Path>, out_dir: &Path) -> Result<()> {
    let config = exp.config(None)?;
    let experiment = Experiment::prepare(config)?;
    tracing::info!(targets = experiment.targets().len(), strategy = %experiment.config().strategy, "running");
    let report = experiment.run()?;
    log_failures(&report);
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| out_dir.join(report_name(&report)));
    write_report(&report, &path)?;
    emit(&format!(
        "{}macro_f1\t{}\nreport\t{}\n",
        summary_table(std::slice::from_ref(&report)),
        report.macro_f1,
        path.display()
    ))
}

fn cmd_sweep(exp: &ExperimentArgs, sizes: &[usize], out_dir: &Path) -> Result<()> {
    let config = exp.config(Some(PromptStrategy::ZeroShotContext))?;
    tracing::info!(?sizes, "sweeping context sizes");
    let reports = sweep_context(config, sizes)?;
    for r in &reports {
        log_failures(r);
        write_report(r, &out_dir.join(report_name(r)))?;
    }
    emit(&summary_table(&reports))
}

fn read_report(path: &Path) -> Result<ExperimentReport> {
    ExperimentReport::read(path).with_context(|| format!("reading report {}", path.display()))
}

fn summary_csv(reports: &[(PathBuf, ExperimentReport)]) -> String {
    let mut out = String::from(
        "report,strategy,dataset,variant,context_size,macro_f1,f1_happy,f1_sad,f1_neutral,f1_angry,targets,invalid,config_hash\n",
    );
    for (path, r) in reports {
        let f1: Vec<String> = r.per_class.iter().map(|m| m.f1.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            path.display(),
            r.strategy,
            r.dataset,
            r.variant,
            r.context_size,
            r.macro_f1,
            f1.join(","),
            r.targets,
            r.invalid,
            r.config_hash
        );
    }
    out
}

fn cmd_report(paths: &[PathBuf], csv: Option<&Path>, confusion: bool) -> Result<()> {
    let reports: Vec<(PathBuf, ExperimentReport)> = paths
        .iter()
        .map(|p| Ok((p.clone(), read_report(p)?)))
        .collect::<Result<_>>()?;
    if let Some(csv) = csv {
        std::fs::write(csv, summary_csv(&reports)).with_context(|| format!("writing {}", csv.display()))?;
    }
    let plain: Vec<ExperimentReport> = reports.iter().map(|(_, r)| r.clone()).collect();
    let mut text = summary_table(&plain);
    if confusion {
        for (path, r) in &reports {
            let _ = write!(text, "\n{}\n{}", path.display(), r.confusion.to_csv());
        }
    }
    emit(&text)
}

fn cmd_compare(a: &Path, b: &Path, json: bool) -> Result<()> {
    let delta = compare_reports(&read_report(a)?, &read_report(b)?)?;
    if json {
        emit(&format!("{}\n", serde_json::to_string_pretty(&delta)?))
    } else {
        emit(&delta.table())
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_target(false)
        .without_time()
        .with_ansi(std::io::stderr().is_terminal())
        .with_env_filter(EnvFilter::try_from_env("AERKIT_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest {
            input,
            format,
            scheme,
            out,
        } => cmd_ingest(input, *format, scheme, out),
        Command::BuildStore { config } => cmd_build_store(config),
        Command::Run { exp, out, out_dir } => cmd_run(exp, out.as_deref(), out_dir),
        Command::SweepContext { exp, sizes, out_dir } => cmd_sweep(exp, sizes, out_dir),
        Command::Report {
            reports,
            csv,
            confusion,
        } => cmd_report(reports, csv.as_deref(), *confusion),
        Command::Compare { a, b, json } => cmd_compare(a, b, *json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
