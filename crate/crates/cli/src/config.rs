use std::path::{Path, PathBuf};

use era_core::counterfactual::{AugmentMode, Domain};
use era_core::distill::DistillConfig;
use era_core::metrics::ceat::DEFAULT_SAMPLES;
use era_core::metrics::polarity::POLARITY_THRESHOLD;
use era_core::model::perplexity::{DEFAULT_CHUNK, DEFAULT_STRIDE};
use era_core::model::{SamplerConfig, TokenizerMode, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Input and output locations. Unset inputs fall back to command flags or
/// built-in data where one exists.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub gender_lexicon: Option<PathBuf>,
    pub race_lexicon: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub teacher: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub scorer: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub context_order: usize,
    pub dim: usize,
    /// Upper bound on vocabulary size, specials included.
    pub vocab_size: usize,
    pub tokenizer: TokenizerMode,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            context_order: 3,
            dim: 32,
            vocab_size: 2000,
            tokenizer: TokenizerMode::Word,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// Polarity magnitude at which a generation counts as gendered.
    pub threshold: f64,
    /// Repeated evaluation runs, summarized as mean and std.
    pub runs: usize,
    pub ceat_samples: usize,
    pub chunk: usize,
    pub stride: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            threshold: POLARITY_THRESHOLD,
            runs: 5,
            ceat_samples: DEFAULT_SAMPLES,
            chunk: DEFAULT_CHUNK,
            stride: DEFAULT_STRIDE,
        }
    }
}

/// Everything a pipeline stage needs, resolved from a config file plus
/// flag overrides (flags win). Component seeds follow the global seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub domain: Domain,
    pub augment_mode: AugmentMode,
    pub paths: Paths,
    pub model: ModelSettings,
    pub teacher: TrainConfig,
    pub distill: DistillConfig,
    pub sampler: SamplerConfig,
    pub eval: EvalSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            domain: Domain::Gender,
            augment_mode: AugmentMode::Append,
            paths: Paths::default(),
            model: ModelSettings::default(),
            teacher: TrainConfig::default(),
            distill: DistillConfig::default(),
            sampler: SamplerConfig::default(),
            eval: EvalSettings::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        if !path.is_file() {
            return Err(CliError::config(format!("--config: {} does not exist", path.display())));
        }
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("--config {}: {e}", path.display())))
    }

    /// Copies the global seed into every component.
    pub fn propagate_seed(&mut self) {
        self.teacher.seed = self.seed;
        self.distill.seed = self.seed;
        self.sampler.seed = self.seed;
    }

    pub fn validate(&self) -> CliResult<()> {
        self.teacher.validate()?;
        self.distill.validate()?;
        self.sampler.validate()?;
        let m = &self.model;
        if m.context_order == 0 || m.dim == 0 {
            return Err(CliError::config("model.context_order and model.dim must be at least 1"));
        }
        if m.vocab_size < 4 {
            return Err(CliError::config("model.vocab_size must leave room for the special tokens"));
        }
        let e = &self.eval;
        if !(e.threshold > 0.0 && e.threshold <= 1.0) {
            return Err(CliError::config(format!("eval.threshold must lie in (0, 1], got {}", e.threshold)));
        }
        if e.runs == 0 || e.ceat_samples == 0 {
            return Err(CliError::config("eval.runs and eval.ceat_samples must be at least 1"));
        }
        if e.stride == 0 || e.stride > e.chunk {
            return Err(CliError::config("eval needs 0 < stride <= chunk"));
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out_dir.clone().unwrap_or_else(|| PathBuf::from("era-out"))
    }
}

/// Hex SHA-256 of a value's canonical JSON form.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("configs serialize");
    hex::encode(Sha256::digest(bytes))
}

/// One documented default.
pub struct DefaultDoc {
    pub key: &'static str,
    pub value: String,
    pub source: &'static str,
}

/// Defaults that come from the reference experimental setup, with where
/// each one is stated.
pub fn documented_defaults() -> Vec<DefaultDoc> {
    let c = PipelineConfig::default();
    let doc = |key, value: String, source| DefaultDoc { key, value, source };
    vec![
        doc(
            "distill.alpha_ce",
            c.distill.alpha_ce.to_string(),
            "training-details appendix, language model training: equal weights for the LM loss and the KL term",
        ),
        doc(
            "distill.alpha_kl",
            c.distill.alpha_kl.to_string(),
            "training-details appendix, language model training: equal weights for the LM loss and the KL term",
        ),
        doc(
            "distill.temperature",
            c.distill.temperature.to_string(),
            "training-details appendix, language model training: distillation temperature",
        ),
        doc(
            "distill.scale_kl_by_t2",
            c.distill.scale_kl_by_t2.to_string(),
            "training-details appendix: the reference distillation setup multiplies the KL term by T^2",
        ),
        doc(
            "sampler.top_p",
            c.sampler.top_p.to_string(),
            "training-details appendix, language model evaluation: top-p sampling for all generation",
        ),
        doc(
            "sampler.max_length",
            c.sampler.max_length.to_string(),
            "training-details appendix, language model evaluation: maximum generated length",
        ),
        doc(
            "eval.threshold",
            c.eval.threshold.to_string(),
            "evaluation-metrics section, gender polarity: |score| at which a text is gender-polar",
        ),
        doc(
            "eval.ceat_samples",
            c.eval.ceat_samples.to_string(),
            "training-details appendix, CEAT details: number of sampled effect sizes",
        ),
        doc(
            "eval.runs",
            c.eval.runs.to_string(),
            "results table for open-ended generation: mean and std over 5 evaluation runs",
        ),
        doc(
            "eval.chunk / eval.stride",
            format!("{} / {}", c.eval.chunk, c.eval.stride),
            "desk-scale analogue of the 1024/512 perplexity windows in the training-details appendix",
        ),
    ]
}
