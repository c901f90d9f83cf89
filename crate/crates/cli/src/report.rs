use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::io::{ensure_dir, write_json};

pub const SCHEMA_VERSION: u32 = 1;

/// Summary of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub stage: String,
    pub config_hash: String,
    /// Descriptive tags such as the model's method, mod-fn and augment flag.
    pub labels: BTreeMap<String, String>,
    pub metrics: Value,
    pub wall_time_secs: f64,
    pub tool_version: String,
}

/// Writes `<stage>.metrics.json` (the deterministic payload) and
/// `<stage>.report.json` into `out_dir`.
pub fn emit(
    out_dir: &Path,
    stage: &str,
    config_hash: String,
    labels: BTreeMap<String, String>,
    metrics: Value,
    started: Instant,
) -> CliResult<RunReport> {
    ensure_dir(out_dir)?;
    write_json(&out_dir.join(format!("{stage}.metrics.json")), &metrics)?;
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        stage: stage.to_string(),
        config_hash,
        labels,
        metrics,
        wall_time_secs: started.elapsed().as_secs_f64(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_json(&out_dir.join(format!("{stage}.report.json")), &report)?;
    Ok(report)
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub method: String,
    pub mod_fn: String,
    pub augment: String,
    pub perplexity: Option<f64>,
    pub equitability_avg: Option<f64>,
    pub equitability_avg_std: Option<f64>,
    pub equitability_min: Option<f64>,
    pub equitability_min_std: Option<f64>,
    pub fluency: Option<f64>,
    pub fluency_std: Option<f64>,
    pub stages: String,
}

fn find_reports(dirs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut found = Vec::new();
    for dir in dirs {
        let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| CliError::io(dir, e))?.path();
            let is_report = path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".report.json"));
            if is_report && path.is_file() {
                found.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}

pub fn load_reports(dirs: &[PathBuf]) -> CliResult<Vec<RunReport>> {
    let paths = find_reports(dirs)?;
    if paths.is_empty() {
        return Err(CliError::NotFound("no reports found".into()));
    }
    let mut reports: Vec<RunReport> = Vec::with_capacity(paths.len());
    for path in &paths {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let report: RunReport = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(format!(
                "{}: schema version {} does not match {}",
                path.display(),
                report.schema_version,
                SCHEMA_VERSION
            )));
        }
        if reports.iter().any(|r| r.config_hash == report.config_hash) {
            log::warn!("{}: duplicate config hash {}, skipped", path.display(), report.config_hash);
            continue;
        }
        reports.push(report);
    }
    Ok(reports)
}

fn number(v: &Value, pointer: &str) -> Option<f64> {
    v.pointer(pointer).and_then(Value::as_f64)
}

/// Merges reports into one row per evaluated model. Reports without a
/// `model` label each get their own row.
pub fn comparison(reports: &[RunReport]) -> Vec<ComparisonRow> {
    let mut rows: BTreeMap<String, ComparisonRow> = BTreeMap::new();
    for r in reports {
        let key = r.labels.get("model").cloned().unwrap_or_else(|| r.config_hash.clone());
        let row = rows.entry(key.clone()).or_insert_with(|| ComparisonRow {
            model: key,
            ..Default::default()
        });
        let label = |k: &str| r.labels.get(k).cloned();
        for (slot, k) in [(&mut row.method, "method"), (&mut row.mod_fn, "mod_fn"), (&mut row.augment, "augment")] {
            if slot.is_empty() {
                *slot = label(k).unwrap_or_default();
            }
        }
        let m = &r.metrics;
        row.perplexity = row.perplexity.or(number(m, "/perplexity"));
        row.equitability_avg = row.equitability_avg.or(number(m, "/equitability/average/mean"));
        row.equitability_avg_std = row.equitability_avg_std.or(number(m, "/equitability/average/std"));
        row.equitability_min = row.equitability_min.or(number(m, "/equitability/minimum/mean"));
        row.equitability_min_std = row.equitability_min_std.or(number(m, "/equitability/minimum/std"));
        row.fluency = row.fluency.or(number(m, "/fluency/mean"));
        row.fluency_std = row.fluency_std.or(number(m, "/fluency/std"));
        if !row.stages.is_empty() {
            row.stages.push(';');
        }
        row.stages.push_str(&r.stage);
    }
    rows.into_values().collect()
}

pub fn write_comparison(out_dir: &Path, rows: &[ComparisonRow]) -> CliResult<()> {
    ensure_dir(out_dir)?;
    write_json(&out_dir.join("comparison.json"), rows)?;
    let path = out_dir.join("comparison.csv");
    let err = |e: csv::Error| CliError::io(&path, e.into());
    let mut w = csv::Writer::from_path(&path).map_err(err)?;
    for row in rows {
        w.serialize(row).map_err(err)?;
    }
    if rows.is_empty() {
        w.write_record(["model"]).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))
}
