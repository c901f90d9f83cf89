use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::embeddings::EmbeddingTable;
use super::equitability::{aggregate_equitability, EquitabilityReport};
use super::polarity::{polarity_with, GenderDirection, Polarity};
use super::MetricsError;
use crate::model::sample::generate_with_rng;
use crate::model::{ReferenceLM, SamplerConfig, Tokenizer};

/// A prompt tagged with its group (e.g. a profession).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub group: String,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredGeneration {
    pub group: String,
    pub prompt: String,
    pub continuation: String,
    pub score: f64,
    pub label: Polarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRun {
    pub run: usize,
    pub equitability: EquitabilityReport,
    pub generations: Vec<ScoredGeneration>,
}

/// Mean and sample standard deviation over evaluation runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedEquitability {
    pub average: MeanStd,
    pub minimum: MeanStd,
    pub runs: Vec<GenerationRun>,
}

/// Generates one continuation per prompt and scores its gender polarity.
///
/// Run `r` samples from a ChaCha8 stream `r` keyed by `sampler.seed`, so
/// runs differ from each other and each is reproducible.
pub fn generation_run(
    model: &ReferenceLM,
    tokenizer: &Tokenizer,
    prompts: &[Prompt],
    embeddings: &EmbeddingTable,
    sampler: &SamplerConfig,
    threshold: f64,
    run: usize,
) -> Result<GenerationRun, MetricsError> {
    if prompts.is_empty() {
        return Err(MetricsError::Empty("no prompts".into()));
    }
    sampler.validate().map_err(|e| MetricsError::Invalid(e.to_string()))?;
    let direction = GenderDirection::new(embeddings)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    rng.set_stream(run as u64);
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut generations = Vec::with_capacity(prompts.len());
    for p in prompts {
        let g = generate_with_rng(model, tokenizer, &p.prompt, sampler, &mut rng);
        let verdict = polarity_with(&g.continuation, embeddings, &direction);
        let label = Polarity::classify(verdict.score, threshold);
        let entry = counts.entry(p.group.clone()).or_default();
        match label {
            Polarity::MalePolar => entry.0 += 1,
            Polarity::FemalePolar => entry.1 += 1,
            Polarity::Neutral => {}
        }
        generations.push(ScoredGeneration {
            group: p.group.clone(),
            prompt: p.prompt.clone(),
            continuation: g.continuation,
            score: verdict.score,
            label,
        });
    }
    Ok(GenerationRun {
        run,
        equitability: aggregate_equitability(&counts)?,
        generations,
    })
}

/// [`generation_run`] repeated `runs` times, summarized as mean and std.
pub fn repeated_equitability(
    model: &ReferenceLM,
    tokenizer: &Tokenizer,
    prompts: &[Prompt],
    embeddings: &EmbeddingTable,
    sampler: &SamplerConfig,
    threshold: f64,
    runs: usize,
) -> Result<RepeatedEquitability, MetricsError> {
    if runs == 0 {
        return Err(MetricsError::Invalid("runs must be at least 1".into()));
    }
    let runs: Vec<GenerationRun> = (0..runs)
        .map(|r| generation_run(model, tokenizer, prompts, embeddings, sampler, threshold, r))
        .collect::<Result<_, _>>()?;
    let avg: Vec<f64> = runs.iter().map(|r| r.equitability.average).collect();
    let min: Vec<f64> = runs.iter().map(|r| r.equitability.minimum).collect();
    Ok(RepeatedEquitability {
        average: MeanStd::of(&avg).expect("runs > 0"),
        minimum: MeanStd::of(&min).expect("runs > 0"),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelShape, TokenizerMode};

    fn setup() -> (ReferenceLM, Tokenizer, EmbeddingTable) {
        let tok = Tokenizer::build(&["the nurse said she", "the pilot said he"], 50, TokenizerMode::Word)
            .unwrap();
        let model = ReferenceLM::random(ModelShape { context_order: 2, dim: 3 }, tok.vocab_size(), 1.0, 9);
        let emb = EmbeddingTable::from_entries([
            ("she", vec![1.0, 0.0]),
            ("he", vec![-1.0, 0.0]),
            ("nurse", vec![0.0, 1.0]),
        ])
        .unwrap();
        (model, tok, emb)
    }

    fn prompts() -> Vec<Prompt> {
        ["nurse", "pilot"]
            .iter()
            .flat_map(|g| {
                (0..3).map(move |_| Prompt { group: g.to_string(), prompt: format!("the {g} said") })
            })
            .collect()
    }

    #[test]
    fn repeated_runs_report_mean_and_std() {
        let (m, tok, emb) = setup();
        let cfg = SamplerConfig { max_length: 4, ..Default::default() };
        let rep = repeated_equitability(&m, &tok, &prompts(), &emb, &cfg, 0.25, 5).unwrap();
        assert_eq!(rep.runs.len(), 5);
        assert_eq!(rep.runs[0].equitability.per_group.len(), 2);
        assert!(rep.average.std >= 0.0);
        let again = repeated_equitability(&m, &tok, &prompts(), &emb, &cfg, 0.25, 5).unwrap();
        assert_eq!(rep, again);
    }

    #[test]
    fn missing_gender_words_is_an_error() {
        let (m, tok, _) = setup();
        let emb = EmbeddingTable::from_entries([("x", vec![1.0])]).unwrap();
        let r = generation_run(&m, &tok, &prompts(), &emb, &SamplerConfig::default(), 0.25, 0);
        assert!(matches!(r, Err(MetricsError::MissingWord(_))));
    }

    #[test]
    fn mean_std_uses_sample_deviation() {
        let s = MeanStd::of(&[1.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(MeanStd::of(&[4.0]).unwrap().std, 0.0);
    }
}
