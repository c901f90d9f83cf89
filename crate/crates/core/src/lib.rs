//! Fair knowledge distillation for autoregressive language models:
//! counterfactual corpus rewriting, distillation against modified teacher
//! distributions, and disparity metrics.

pub mod counterfactual;
pub mod distill;
pub mod lexicon;
pub mod logprob;
pub mod metrics;
pub mod model;

pub use logprob::LogProbVector;
