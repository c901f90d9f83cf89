//! Disparity and quality metrics: embedding-based gender polarity,
//! equitability, WEAT/CEAT effect sizes, TPRD and regard-ratio variance.

pub mod ceat;
pub mod embeddings;
pub mod equitability;
pub mod generation;
pub mod polarity;
pub mod regard;
pub mod tprd;
pub mod weat;

use std::path::PathBuf;

pub use ceat::{ceat_ces, CeatTest, EffectSizeReport};
pub use embeddings::EmbeddingTable;
pub use equitability::{aggregate_equitability, equitability, EquitabilityReport};
pub use generation::{repeated_equitability, MeanStd, Prompt, RepeatedEquitability};
pub use polarity::{polarity_score, Polarity, PolarityVerdict};
pub use regard::{regard_ratios, RegardCounts, RegardReport};
pub use tprd::{tprd, TprdReport};
pub use weat::{effect_size, weat_association, StdConvention};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("word {0:?} has no embedding")]
    MissingWord(String),
    #[error("word {0:?} has a zero-norm embedding")]
    ZeroVector(String),
    #[error("effect size undefined: {0}")]
    UndefinedEffect(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("invalid value: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
