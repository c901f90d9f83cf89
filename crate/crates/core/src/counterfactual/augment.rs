use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::rewrite::Rewriter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentMode {
    /// Each original followed by its counterfactual, when one exists.
    #[default]
    Append,
    /// Counterfactuals only.
    CfOnly,
}

impl std::str::FromStr for AugmentMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "append" => Ok(AugmentMode::Append),
            "cf-only" => Ok(AugmentMode::CfOnly),
            other => Err(format!("unknown augment mode {other:?} (expected append or cf-only)")),
        }
    }
}

/// Substitution as written to JSONL; `span` indexes the record's own text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstitutionJson {
    pub orig: String,
    pub repl: String,
    pub span: [usize; 2],
}

/// One line of a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub is_counterfactual: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substitutions: Option<Vec<SubstitutionJson>>,
}

impl CorpusRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            is_counterfactual: false,
            source_id: None,
            substitutions: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AugmentStats {
    pub inputs: usize,
    pub with_counterfactual: usize,
    pub malformed: usize,
    pub outputs: usize,
}

impl AugmentStats {
    /// Fraction of inputs that produced a counterfactual; `None` for an empty stream.
    pub fn coverage(&self) -> Option<f64> {
        (self.inputs > 0).then(|| self.with_counterfactual as f64 / self.inputs as f64)
    }
}

fn accepts_id(value: &serde_json::Value) -> Option<String> {
    match value {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Parses one input line into `(id, text)`; ids may be strings or numbers.
fn parse_input(line: &str) -> Option<(String, String)> {
    let v: serde_json::Value = serde_json::from_str(line).ok()?;
    let id = accepts_id(v.get("id")?)?;
    let text = v.get("text")?.as_str()?.to_string();
    Some((id, text))
}

fn expand(
    index: usize,
    id: String,
    text: String,
    rewriter: &Rewriter<'_>,
    mode: AugmentMode,
    stats: &mut AugmentStats,
    mut emit: impl FnMut(CorpusRecord),
) {
    stats.inputs += 1;
    let rec = rewriter.rewrite(&text, index as u64);
    if rec.is_some() {
        stats.with_counterfactual += 1;
    }
    if mode == AugmentMode::Append {
        emit(CorpusRecord::new(id.clone(), text));
        stats.outputs += 1;
    }
    if let Some(rec) = rec {
        let subs = rec
            .substitutions
            .iter()
            .map(|s| SubstitutionJson {
                orig: s.original.clone(),
                repl: s.replacement.clone(),
                span: [s.counterfactual_span.0, s.counterfactual_span.1],
            })
            .collect();
        emit(CorpusRecord {
            id: format!("{id}-cf"),
            text: rec.counterfactual,
            is_counterfactual: true,
            source_id: Some(id),
            substitutions: Some(subs),
        });
        stats.outputs += 1;
    }
}

/// In-memory augmentation of already parsed records; output keeps input order.
pub fn augment_records(
    records: &[CorpusRecord],
    rewriter: &Rewriter<'_>,
    mode: AugmentMode,
) -> (Vec<CorpusRecord>, AugmentStats) {
    let mut stats = AugmentStats::default();
    let mut out = Vec::new();
    for (i, r) in records.iter().enumerate() {
        expand(i, r.id.clone(), r.text.clone(), rewriter, mode, &mut stats, |c| out.push(c));
    }
    (out, stats)
}

/// Streams a JSONL corpus through the rewriter. Malformed lines are skipped
/// and counted; blank lines are ignored. Record indices (which seed race
/// draws) count well-formed records only.
pub fn augment_corpus<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    rewriter: &Rewriter<'_>,
    mode: AugmentMode,
) -> std::io::Result<AugmentStats> {
    let mut stats = AugmentStats::default();
    let mut write_err = None;
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, text)) = parse_input(&line) else {
            log::warn!("augment: skipping malformed line {}", lineno + 1);
            stats.malformed += 1;
            continue;
        };
        let index = stats.inputs;
        expand(index, id, text, rewriter, mode, &mut stats, |rec| {
            if write_err.is_none() {
                let res = serde_json::to_writer(&mut output, &rec)
                    .map_err(std::io::Error::from)
                    .and_then(|_| output.write_all(b"\n"));
                if let Err(e) = res {
                    write_err = Some(e);
                }
            }
        });
        if let Some(e) = write_err.take() {
            return Err(e);
        }
    }
    output.flush()?;
    Ok(stats)
}
