use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use era_core::metrics::Prompt;
use era_core::model::EpochLog;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Resolves a required path, failing with a diagnostic naming `flag`.
pub fn require(flag: &str, path: Option<&PathBuf>) -> CliResult<PathBuf> {
    let path = path.ok_or_else(|| CliError::config(format!("{flag} is required")))?;
    check_exists(flag, path)?;
    Ok(path.clone())
}

/// Fails when a path given under `flag` does not exist.
pub fn check_exists(flag: &str, path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::config(format!("{flag}: {} does not exist", path.display())))
    }
}

pub fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn is_jsonl(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("jsonl" | "ndjson"))
}

fn jsonl_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line)
            .map_err(|e| CliError::config(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(value);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct TextLine {
    text: String,
}

/// Texts of a corpus: the `text` field of each JSONL record, or each
/// non-blank line of a plain text file.
pub fn read_texts(path: &Path) -> CliResult<Vec<String>> {
    if is_jsonl(path) {
        return Ok(jsonl_lines::<TextLine>(path)?.into_iter().map(|t| t.text).collect());
    }
    let mut out = Vec::new();
    for line in open(path)?.lines() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(line);
        }
    }
    Ok(out)
}

/// Prompts from JSONL `{"group": ..., "prompt": ...}`.
pub fn read_prompts(path: &Path) -> CliResult<Vec<Prompt>> {
    let prompts: Vec<Prompt> = jsonl_lines(path)?;
    if prompts.is_empty() {
        return Err(CliError::config(format!("{}: no prompts", path.display())));
    }
    Ok(prompts)
}

#[derive(Deserialize)]
struct GroupedText {
    group: String,
    text: String,
}

/// Texts grouped from JSONL `{"group": ..., "text": ...}`.
pub fn read_grouped_texts(path: &Path) -> CliResult<BTreeMap<String, Vec<String>>> {
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for g in jsonl_lines::<GroupedText>(path)? {
        groups.entry(g.group).or_default().push(g.text);
    }
    if groups.is_empty() {
        return Err(CliError::config(format!("{}: no texts", path.display())));
    }
    Ok(groups)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = create(path)?;
    for row in rows {
        serde_json::to_writer(&mut w, row).map_err(|e| CliError::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_epochs(path: &Path, logs: &[EpochLog]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| CliError::io(path, e.into());
    w.write_record(["epoch", "ce", "kl", "total"]).map_err(err)?;
    for l in logs {
        w.serialize((l.epoch, l.ce, l.kl, l.total)).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
