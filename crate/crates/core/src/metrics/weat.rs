use serde::{Deserialize, Serialize};

use super::embeddings::{cosine, EmbeddingTable};
use super::MetricsError;

/// Variance normalization for the effect-size denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdConvention {
    /// Divide by `n - 1`.
    #[default]
    Sample,
    /// Divide by `n`.
    Population,
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len() as f64;
    xs.sum::<f64>() / n
}

/// `mean_a cos(w, a) - mean_b cos(w, b)`.
pub fn association(w: &[f64], a: &[&[f64]], b: &[&[f64]]) -> f64 {
    mean(a.iter().map(|x| cosine(w, x))) - mean(b.iter().map(|x| cosine(w, x)))
}

pub fn variance(xs: &[f64], convention: StdConvention) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    match convention {
        StdConvention::Sample => ss / (n - 1.0),
        StdConvention::Population => ss / n,
    }
}

/// Effect size on vectors, plus the in-sample variance of the associations
/// over `X ∪ Y` (the denominator squared).
pub fn effect_size_vectors(
    x: &[&[f64]],
    y: &[&[f64]],
    a: &[&[f64]],
    b: &[&[f64]],
    convention: StdConvention,
) -> Result<(f64, f64), MetricsError> {
    if x.is_empty() || y.is_empty() || a.is_empty() || b.is_empty() {
        return Err(MetricsError::Empty("effect size needs four non-empty word sets".into()));
    }
    let sx: Vec<f64> = x.iter().map(|w| association(w, a, b)).collect();
    let sy: Vec<f64> = y.iter().map(|w| association(w, a, b)).collect();
    let diff = mean(sx.iter().copied()) - mean(sy.iter().copied());
    let all: Vec<f64> = sx.into_iter().chain(sy).collect();
    let var = variance(&all, convention);
    if !(var > 0.0) {
        return Err(MetricsError::UndefinedEffect(
            "associations over X and Y have zero spread".into(),
        ));
    }
    Ok((diff / var.sqrt(), var))
}

fn lookup<'e>(emb: &'e EmbeddingTable, words: &[&str]) -> Result<Vec<&'e [f64]>, MetricsError> {
    words.iter().map(|w| emb.require(w)).collect()
}

/// `s(w, A, B)` for words in an embedding table.
pub fn weat_association(
    w: &str,
    a: &[&str],
    b: &[&str],
    emb: &EmbeddingTable,
) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::Empty("attribute sets must be non-empty".into()));
    }
    Ok(association(emb.require(w)?, &lookup(emb, a)?, &lookup(emb, b)?))
}

/// WEAT effect size with the sample standard deviation over `X ∪ Y`.
pub fn effect_size(
    x: &[&str],
    y: &[&str],
    a: &[&str],
    b: &[&str],
    emb: &EmbeddingTable,
) -> Result<f64, MetricsError> {
    effect_size_with(x, y, a, b, emb, StdConvention::Sample)
}

pub fn effect_size_with(
    x: &[&str],
    y: &[&str],
    a: &[&str],
    b: &[&str],
    emb: &EmbeddingTable,
    convention: StdConvention,
) -> Result<f64, MetricsError> {
    let (es, _) = effect_size_vectors(
        &lookup(emb, x)?,
        &lookup(emb, y)?,
        &lookup(emb, a)?,
        &lookup(emb, b)?,
        convention,
    )?;
    Ok(es)
}
