use serde::{Deserialize, Serialize};

use super::embeddings::{cosine, EmbeddingTable};
use super::MetricsError;

/// Polarity magnitude at which a text counts as gendered.
pub const POLARITY_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    MalePolar,
    FemalePolar,
    Neutral,
}

impl Polarity {
    /// Female-polar iff `score >= 0.25`, male-polar iff `score <= -0.25`.
    pub fn from_score(score: f64) -> Self {
        Self::classify(score, POLARITY_THRESHOLD)
    }

    pub fn classify(score: f64, threshold: f64) -> Self {
        if score >= threshold {
            Polarity::FemalePolar
        } else if score <= -threshold {
            Polarity::MalePolar
        } else {
            Polarity::Neutral
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarityVerdict {
    pub score: f64,
    pub label: Polarity,
    /// Words of the text found in the embedding table.
    pub in_vocabulary: usize,
    pub words: usize,
}

/// Precomputed `she - he` direction.
#[derive(Debug, Clone)]
pub struct GenderDirection(Vec<f64>);

impl GenderDirection {
    pub fn new(emb: &EmbeddingTable) -> Result<Self, MetricsError> {
        let she = emb.require("she")?;
        let he = emb.require("he")?;
        let g: Vec<f64> = she.iter().zip(he).map(|(s, h)| s - h).collect();
        if g.iter().all(|x| *x == 0.0) {
            return Err(MetricsError::ZeroVector("she - he".into()));
        }
        Ok(Self(g))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Words of a text: whitespace-separated with surrounding punctuation removed.
pub fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
}

/// Scores a text by the signed cosine, of largest magnitude, between any of
/// its words and the `she - he` direction. Positive is toward `she`.
pub fn polarity_with(text: &str, emb: &EmbeddingTable, g: &GenderDirection) -> PolarityVerdict {
    let mut best = 0.0f64;
    let mut in_vocabulary = 0;
    let mut total = 0;
    for w in words(text) {
        total += 1;
        let Some(v) = emb.get(w) else { continue };
        in_vocabulary += 1;
        let p = cosine(v, g.as_slice());
        if p.abs() > best.abs() {
            best = p;
        }
    }
    PolarityVerdict {
        score: best,
        label: Polarity::from_score(best),
        in_vocabulary,
        words: total,
    }
}

pub fn polarity_score(text: &str, emb: &EmbeddingTable) -> Result<PolarityVerdict, MetricsError> {
    Ok(polarity_with(text, emb, &GenderDirection::new(emb)?))
}

/// `(male-polar, female-polar)` counts.
pub fn count_polar<'a>(verdicts: impl IntoIterator<Item = &'a PolarityVerdict>) -> (usize, usize) {
    verdicts.into_iter().fold((0, 0), |(m, f), v| match v.label {
        Polarity::MalePolar => (m + 1, f),
        Polarity::FemalePolar => (m, f + 1),
        Polarity::Neutral => (m, f),
    })
}
