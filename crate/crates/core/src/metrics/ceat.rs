use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::weat::{effect_size_vectors, StdConvention};
use super::MetricsError;

/// Default number of sampled effect sizes.
pub const DEFAULT_SAMPLES: usize = 10_000;

/// A labelled word set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSet {
    pub label: String,
    pub words: Vec<String>,
}

/// Targets `x`, `y` and attributes `a`, `b` of an association test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CeatTest {
    pub name: String,
    pub x: WordSet,
    pub y: WordSet,
    pub a: WordSet,
    pub b: WordSet,
}

impl CeatTest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| MetricsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// One of the shipped gender tests: `ceat6`, `ceat7` or `ceat8`.
    pub fn builtin(name: &str) -> Option<Self> {
        let json = match name {
            "ceat6" => include_str!("../../data/ceat/ceat6.json"),
            "ceat7" => include_str!("../../data/ceat/ceat7.json"),
            "ceat8" => include_str!("../../data/ceat/ceat8.json"),
            _ => return None,
        };
        Some(serde_json::from_str(json).expect("shipped test is valid"))
    }

    /// All words in draw order: X, Y, A, B.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        [&self.x, &self.y, &self.a, &self.b]
            .into_iter()
            .flat_map(|s| s.words.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSizeReport {
    /// Sampled effect sizes `ES_i`.
    pub samples: Vec<f64>,
    /// Random-effects weights `1 / (in-sample variance + tau^2)`.
    pub weights: Vec<f64>,
    /// Between-sample variance.
    pub tau2: f64,
    /// Combined effect size `sum(w ES) / sum(w)`.
    pub ces: f64,
}

/// Pools effect sizes with a DerSimonian-Laird random-effects model.
///
/// `variances` are the in-sample variances of the effect-size samples.
pub fn random_effects(samples: &[f64], variances: &[f64]) -> Result<EffectSizeReport, MetricsError> {
    if samples.is_empty() || samples.len() != variances.len() {
        return Err(MetricsError::Empty("no effect-size samples".into()));
    }
    if let Some(v) = variances.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(MetricsError::UndefinedEffect(format!("in-sample variance {v}")));
    }
    let w: Vec<f64> = variances.iter().map(|v| 1.0 / v).collect();
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|x| x * x).sum();
    let swe: f64 = w.iter().zip(samples).map(|(w, e)| w * e).sum();
    let swe2: f64 = w.iter().zip(samples).map(|(w, e)| w * e * e).sum();
    let q = swe2 - swe * swe / sw;
    let df = (samples.len() - 1) as f64;
    let c = sw - sw2 / sw;
    let tau2 = if c > 0.0 { ((q - df) / c).max(0.0) } else { 0.0 };
    let weights: Vec<f64> = variances.iter().map(|v| 1.0 / (v + tau2)).collect();
    let num: f64 = weights.iter().zip(samples).map(|(w, e)| w * e).sum();
    let den: f64 = weights.iter().sum();
    Ok(EffectSizeReport {
        samples: samples.to_vec(),
        weights,
        tau2,
        ces: num / den,
    })
}

/// Combined effect size over `n` samples. Sample `i` draws one context
/// vector per word (in X, Y, A, B order) from a generator seeded with
/// `seed` on stream `i`, so samples are independent of evaluation order.
pub fn ceat_ces(
    test: &CeatTest,
    contexts: &HashMap<String, Vec<Vec<f64>>>,
    n: usize,
    seed: u64,
) -> Result<EffectSizeReport, MetricsError> {
    if n == 0 {
        return Err(MetricsError::Empty("sample count must be positive".into()));
    }
    let mut pools: Vec<&[Vec<f64>]> = Vec::new();
    for w in test.words() {
        match contexts.get(w) {
            Some(c) if !c.is_empty() => pools.push(c),
            _ => return Err(MetricsError::MissingWord(w.to_string())),
        }
    }
    let sizes = [test.x.words.len(), test.y.words.len(), test.a.words.len()];
    let mut samples = Vec::with_capacity(n);
    let mut variances = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let drawn: Vec<&[f64]> = pools
            .iter()
            .map(|p| p[rng.gen_range(0..p.len())].as_slice())
            .collect();
        let (xs, rest) = drawn.split_at(sizes[0]);
        let (ys, rest) = rest.split_at(sizes[1]);
        let (a, b) = rest.split_at(sizes[2]);
        let (es, var) = effect_size_vectors(xs, ys, a, b, StdConvention::Sample)?;
        samples.push(es);
        variances.push(var);
    }
    random_effects(&samples, &variances)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(label: &str, words: &[&str]) -> WordSet {
        WordSet {
            label: label.into(),
            words: words.iter().map(|w| w.to_string()).collect(),
        }
    }

    fn test_spec() -> CeatTest {
        CeatTest {
            name: "toy".into(),
            x: set("x", &["x1", "x2"]),
            y: set("y", &["y1", "y2"]),
            a: set("a", &["a1"]),
            b: set("b", &["b1"]),
        }
    }

    fn single_contexts() -> HashMap<String, Vec<Vec<f64>>> {
        [
            ("x1", vec![1.0, 0.1]),
            ("x2", vec![0.9, 0.3]),
            ("y1", vec![0.2, 1.0]),
            ("y2", vec![0.1, 0.8]),
            ("a1", vec![1.0, 0.0]),
            ("b1", vec![0.0, 1.0]),
        ]
        .into_iter()
        .map(|(w, v)| (w.to_string(), vec![v]))
        .collect()
    }

    #[test]
    fn one_context_per_word_gives_constant_samples() {
        let r = ceat_ces(&test_spec(), &single_contexts(), 20, 1).unwrap();
        assert!(r.samples.iter().all(|s| *s == r.samples[0]));
        assert!((r.ces - r.samples[0]).abs() < 1e-12);
        assert_eq!(r.tau2, 0.0);
    }

    #[test]
    fn single_sample_ces_equals_its_effect_size() {
        let r = random_effects(&[0.7], &[0.3]).unwrap();
        assert!((r.ces - 0.7).abs() < 1e-15);
        let r = ceat_ces(&test_spec(), &single_contexts(), 1, 9).unwrap();
        assert!((r.ces - r.samples[0]).abs() < 1e-15);
    }

    #[test]
    fn pooling_hand_example() {
        // Unequal in-sample variances, large disagreement => tau^2 > 0.
        let es = [1.0, -0.5, 0.8];
        let v = [0.1, 0.2, 0.4];
        let r = random_effects(&es, &v).unwrap();
        let w = [10.0, 5.0, 2.5];
        let sw: f64 = w.iter().sum();
        let mean = (10.0 - 2.5 + 2.0) / sw;
        let q: f64 = w.iter().zip(es).map(|(w, e)| w * (e - mean) * (e - mean)).sum();
        let c = sw - (100.0 + 25.0 + 6.25) / sw;
        let tau2 = (q - 2.0) / c;
        assert!((r.tau2 - tau2).abs() < 1e-12);
        let ws: Vec<f64> = v.iter().map(|x| 1.0 / (x + tau2)).collect();
        let ces = ws.iter().zip(es).map(|(w, e)| w * e).sum::<f64>() / ws.iter().sum::<f64>();
        assert!((r.ces - ces).abs() < 1e-12);
    }

    #[test]
    fn missing_or_empty_contexts_are_errors() {
        let mut c = single_contexts();
        c.insert("a1".into(), vec![]);
        assert!(matches!(ceat_ces(&test_spec(), &c, 5, 0), Err(MetricsError::MissingWord(w)) if w == "a1"));
        c.remove("a1");
        assert!(ceat_ces(&test_spec(), &c, 5, 0).is_err());
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let mut c = single_contexts();
        c.get_mut("x1").unwrap().push(vec![0.2, 0.9]);
        c.get_mut("y2").unwrap().push(vec![0.9, 0.1]);
        let a = ceat_ces(&test_spec(), &c, 64, 5).unwrap();
        let b = ceat_ces(&test_spec(), &c, 64, 5).unwrap();
        assert_eq!(a, b);
        let lo = a.samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = a.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo <= a.ces && a.ces <= hi);
    }
}
