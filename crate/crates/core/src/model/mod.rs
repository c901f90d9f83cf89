//! Reference autoregressive language model: tokenizer, fixed-context
//! network, maximum-likelihood training, nucleus sampling and perplexity.

pub mod checkpoint;
pub mod lm;
pub mod perplexity;
pub mod sample;
pub mod tokenizer;
pub mod train;

use std::path::PathBuf;

pub use checkpoint::Checkpoint;
pub use lm::{context_window, ModelShape, ReferenceLM};
pub use perplexity::{corpus_perplexity, fluency, perplexity, FluencyReport};
pub use sample::{generate, nucleus, SamplerConfig};
pub use tokenizer::{Tokenizer, TokenizerMode, TokenizerSpec, Vocab};
pub use train::{train_teacher, EpochLog, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("corpus contains no tokens")]
    EmptyCorpus,
    #[error("sequence is empty")]
    EmptySequence,
    #[error("invalid vocabulary: {0}")]
    InvalidVocab(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint JSON: {0}")]
    Json(#[from] serde_json::Error),
}
