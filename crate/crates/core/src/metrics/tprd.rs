use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TprdReport {
    /// Per profession: `(tpr_male, tpr_female, |difference|)`.
    pub per_profession: BTreeMap<String, (f64, f64, f64)>,
    pub tprd: f64,
    /// Professions lacking examples of one gender.
    pub excluded: Vec<String>,
}

/// Mean absolute male/female true-positive-rate gap across professions.
pub fn tprd(rates: &BTreeMap<String, (f64, f64)>) -> Result<TprdReport, MetricsError> {
    if rates.is_empty() {
        return Err(MetricsError::Empty("no professions for TPRD".into()));
    }
    let mut per_profession = BTreeMap::new();
    for (p, &(m, f)) in rates {
        if !((0.0..=1.0).contains(&m) && (0.0..=1.0).contains(&f)) {
            return Err(MetricsError::Invalid(format!("rates for {p:?} outside [0, 1]: ({m}, {f})")));
        }
        per_profession.insert(p.clone(), (m, f, (m - f).abs()));
    }
    let tprd = per_profession.values().map(|v| v.2).sum::<f64>() / per_profession.len() as f64;
    Ok(TprdReport {
        per_profession,
        tprd,
        excluded: Vec::new(),
    })
}

#[derive(Debug, Deserialize)]
struct PredictionRow {
    #[allow(dead_code)]
    example_id: String,
    profession_true: String,
    profession_pred: String,
    gender: String,
}

fn gender_index(g: &str) -> Option<usize> {
    match g.trim().to_ascii_lowercase().as_str() {
        "m" | "male" => Some(0),
        "f" | "female" => Some(1),
        _ => None,
    }
}

/// True-positive rates per profession and gender from a prediction CSV with
/// columns `example_id, profession_true, profession_pred, gender`.
pub fn rates_from_csv<R: Read>(
    reader: R,
) -> Result<(BTreeMap<String, (f64, f64)>, Vec<String>), MetricsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    // (correct, total) per gender.
    let mut counts: BTreeMap<String, [(usize, usize); 2]> = BTreeMap::new();
    for (i, row) in rdr.deserialize::<PredictionRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| MetricsError::Parse { line, message: e.to_string() })?;
        let g = gender_index(&row.gender).ok_or_else(|| MetricsError::Parse {
            line,
            message: format!("unknown gender {:?}", row.gender),
        })?;
        let slot = &mut counts.entry(row.profession_true.clone()).or_default()[g];
        slot.1 += 1;
        if row.profession_pred == row.profession_true {
            slot.0 += 1;
        }
    }
    let mut rates = BTreeMap::new();
    let mut excluded = Vec::new();
    for (p, [m, f]) in counts {
        if m.1 == 0 || f.1 == 0 {
            excluded.push(p);
            continue;
        }
        rates.insert(p, (m.0 as f64 / m.1 as f64, f.0 as f64 / f.1 as f64));
    }
    Ok((rates, excluded))
}

/// TPRD straight from a prediction CSV.
pub fn tprd_from_csv<R: Read>(reader: R) -> Result<TprdReport, MetricsError> {
    let (rates, excluded) = rates_from_csv(reader)?;
    let mut report = tprd(&rates)?;
    report.excluded = excluded;
    Ok(report)
}
