use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::weat::{variance, StdConvention};
use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RegardCounts {
    pub positive: usize,
    pub negative: usize,
    pub neutral: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegardReport {
    /// Positive-to-negative ratio per group.
    pub ratios: BTreeMap<String, f64>,
    /// Population variance of the ratios.
    pub variance: f64,
    /// Sample variance; absent for a single group.
    pub sample_variance: Option<f64>,
    /// Groups with no negative label (infinite ratio), left out.
    pub excluded: Vec<String>,
}

/// Positive/negative regard ratio per group and their spread.
pub fn regard_ratios(counts: &BTreeMap<String, RegardCounts>) -> Result<RegardReport, MetricsError> {
    let mut ratios = BTreeMap::new();
    let mut excluded = Vec::new();
    for (g, c) in counts {
        if c.negative == 0 {
            log::warn!("regard: group {g:?} has no negative labels; ratio is infinite and excluded");
            excluded.push(g.clone());
        } else {
            ratios.insert(g.clone(), c.positive as f64 / c.negative as f64);
        }
    }
    if ratios.is_empty() {
        return Err(MetricsError::Empty("no group has a finite regard ratio".into()));
    }
    let values: Vec<f64> = ratios.values().copied().collect();
    Ok(RegardReport {
        variance: variance(&values, StdConvention::Population),
        sample_variance: (values.len() > 1).then(|| variance(&values, StdConvention::Sample)),
        ratios,
        excluded,
    })
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    group: String,
    label: String,
}

/// Counts from a CSV with columns `group, label`; labels are
/// `positive|negative|neutral` or `1|-1|0`.
pub fn counts_from_csv<R: Read>(reader: R) -> Result<BTreeMap<String, RegardCounts>, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out: BTreeMap<String, RegardCounts> = BTreeMap::new();
    for (i, row) in rdr.deserialize::<LabelRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| MetricsError::Parse { line, message: e.to_string() })?;
        let c = out.entry(row.group).or_default();
        match row.label.to_ascii_lowercase().as_str() {
            "positive" | "1" => c.positive += 1,
            "negative" | "-1" => c.negative += 1,
            "neutral" | "0" => c.neutral += 1,
            other => {
                return Err(MetricsError::Parse {
                    line,
                    message: format!("unknown regard label {other:?}"),
                })
            }
        }
    }
    Ok(out)
}
