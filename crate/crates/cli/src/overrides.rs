//! Layered configuration: TOML file, then `--set key=value`, then typed flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use toml::{Table, Value};

pub fn load_table(path: Option<&Path>) -> Result<Table> {
    let Some(path) = path else {
        return Ok(Table::new());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse::<Table>()
        .with_context(|| format!("parsing {}", path.display()))
}

/// Parses the right-hand side as a TOML value, falling back to a bare string
/// so `--set dataset=data/x.jsonl` works without quoting.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

pub fn set_path(table: &mut Table, dotted: &str, value: Value) -> Result<()> {
    let keys: Vec<&str> = dotted.split('.').map(str::trim).collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("bad override key {dotted:?}");
    }
    let (last, parents) = keys.split_last().expect("split yields one key");
    let mut cur = table;
    for key in parents {
        let slot = cur
            .entry(key.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = match slot {
            Value::Table(t) => t,
            _ => bail!("override {dotted:?}: {key} is not a table"),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

pub fn apply_set(table: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .with_context(|| format!("override {assignment:?} is not key=value"))?;
    set_path(table, key, parse_value(raw.trim()))
}

/// `--mock constant:LABEL | scripted:PATH | paraphrase` replaces the LLM
/// transport but keeps sampling and retry settings.
pub fn apply_mock(table: &mut Table, spec: &str) -> Result<()> {
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let llm = match table.entry("llm").or_insert_with(|| Value::Table(Table::new())) {
        Value::Table(t) => t,
        _ => bail!("llm is not a table"),
    };
    for key in ["kind", "base_url", "model", "api_key_env", "response", "script"] {
        llm.remove(key);
    }
    match kind {
        "constant" => {
            llm.insert("kind".into(), "constant".into());
            llm.insert("response".into(), arg.into());
        }
        "scripted" if !arg.is_empty() => {
            llm.insert("kind".into(), "scripted".into());
            llm.insert("script".into(), arg.into());
        }
        "paraphrase" => {
            llm.insert("kind".into(), "paraphrase".into());
        }
        _ => bail!("--mock expects constant:LABEL, scripted:PATH, or paraphrase; got {spec:?}"),
    }
    Ok(())
}
