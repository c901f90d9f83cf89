use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;

/// `min(m/f, f/m)`; 1 when both counts are zero, 0 when exactly one is.
pub fn equitability(m: usize, f: usize) -> f64 {
    match (m, f) {
        (0, 0) => 1.0,
        (0, _) | (_, 0) => 0.0,
        _ => {
            let (lo, hi) = if m <= f { (m, f) } else { (f, m) };
            lo as f64 / hi as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupEquitability {
    pub male: usize,
    pub female: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquitabilityReport {
    pub per_group: BTreeMap<String, GroupEquitability>,
    pub average: f64,
    pub minimum: f64,
}

/// Equitability per group from `(male-polar, female-polar)` counts, with
/// the mean and minimum across groups.
pub fn aggregate_equitability(
    counts: &BTreeMap<String, (usize, usize)>,
) -> Result<EquitabilityReport, MetricsError> {
    if counts.is_empty() {
        return Err(MetricsError::Empty("no groups for equitability".into()));
    }
    let per_group: BTreeMap<String, GroupEquitability> = counts
        .iter()
        .map(|(g, &(male, female))| {
            (
                g.clone(),
                GroupEquitability {
                    male,
                    female,
                    ratio: equitability(male, female),
                },
            )
        })
        .collect();
    let ratios: Vec<f64> = per_group.values().map(|g| g.ratio).collect();
    let average = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let minimum = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(EquitabilityReport {
        per_group,
        average,
        minimum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_values() {
        assert_eq!(equitability(10, 10), 1.0);
        assert_eq!(equitability(4, 1), 0.25);
        assert_eq!(equitability(1, 4), 0.25);
        assert_eq!(equitability(0, 7), 0.0);
        assert_eq!(equitability(7, 0), 0.0);
        assert_eq!(equitability(0, 0), 1.0);
    }

    /// With one side fixed, the ratio shrinks toward the zero-count limit.
    #[test]
    fn zero_limit_is_consistent_with_monotonicity() {
        let seq: Vec<f64> = (1..50).rev().map(|m| equitability(m, 7 * 50)).collect();
        assert!(seq.windows(2).all(|w| w[1] <= w[0]));
        assert!(equitability(0, 350) <= *seq.last().unwrap());
    }

    #[test]
    fn aggregate_arithmetic() {
        let mut c = BTreeMap::new();
        c.insert("a".to_string(), (3, 3));
        c.insert("b".to_string(), (4, 1));
        let r = aggregate_equitability(&c).unwrap();
        assert!((r.average - 0.625).abs() < 1e-15);
        assert_eq!(r.minimum, 0.25);
        let mut one = BTreeMap::new();
        one.insert("x".to_string(), (2, 3));
        let r = aggregate_equitability(&one).unwrap();
        assert_eq!(r.average, r.minimum);
        assert!(aggregate_equitability(&BTreeMap::new()).is_err());
    }
}
