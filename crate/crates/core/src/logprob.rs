//! Normalized natural-log probability vectors.

use serde::{Deserialize, Serialize};

/// Tolerance used when checking that a vector is a valid log distribution.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Numerically stable `log(sum(exp(values)))`.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `log(exp(a) + exp(b))` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// In-place log-softmax.
pub fn log_softmax_in_place(values: &mut [f64]) {
    let lse = logsumexp(values);
    for v in values.iter_mut() {
        *v -= lse;
    }
}

/// Softmax of `values / temperature`.
pub fn softmax_with_temperature(values: &[f64], temperature: f64) -> Vec<f64> {
    let mut scaled: Vec<f64> = values.iter().map(|v| v / temperature).collect();
    log_softmax_in_place(&mut scaled);
    scaled.iter_mut().for_each(|v| *v = v.exp());
    scaled
}

/// A log-probability distribution over the vocabulary.
///
/// Construction always renormalizes, so every value held by this type
/// satisfies `|logsumexp| <= 1e-9` and `v <= 0` (up to rounding).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogProbVector(Vec<f64>);

impl LogProbVector {
    /// Renormalize arbitrary (unnormalized) log-weights into a distribution.
    ///
    /// Returns `None` when the input is empty or carries no finite mass.
    pub fn from_unnormalized(mut values: Vec<f64>) -> Option<Self> {
        if values.is_empty() || values.iter().any(|v| v.is_nan()) {
            return None;
        }
        let lse = logsumexp(&values);
        if !lse.is_finite() {
            return None;
        }
        for v in values.iter_mut() {
            *v -= lse;
        }
        Some(Self(values))
    }

    /// Natural-log probabilities from a probability vector (which need not sum to one).
    pub fn from_probs(probs: &[f64]) -> Option<Self> {
        Self::from_unnormalized(probs.iter().map(|p| p.ln()).collect())
    }

    /// Uniform distribution over `size` outcomes.
    pub fn uniform(size: usize) -> Self {
        let v = -(size as f64).ln();
        Self(vec![v; size])
    }

    /// Wraps values that are already normalized without touching them.
    ///
    /// Returns `None` if the normalization invariant does not hold.
    pub fn try_from_normalized(values: Vec<f64>) -> Option<Self> {
        let candidate = Self(values);
        candidate.is_normalized().then_some(candidate)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn probs(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.exp()).collect()
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.0[index].exp()
    }

    pub fn is_normalized(&self) -> bool {
        !self.0.is_empty()
            && logsumexp(&self.0).abs() <= NORMALIZATION_TOL
            && self.0.iter().all(|v| *v <= 1e-12)
    }

    /// Total-variation distance to another distribution of the same length.
    pub fn total_variation(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len(), "distribution length mismatch");
        0.5 * self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a.exp() - b.exp()).abs())
            .sum::<f64>()
    }
}

impl AsRef<[f64]> for LogProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}
