//! Knowledge distillation against counterfactually modified teacher
//! distributions, with optional counterfactual data augmentation.

pub mod config;
pub mod gradcheck;
pub mod loss;
pub mod ops;
pub mod targets;
pub mod train;

pub use config::{DistillConfig, ModFn};
pub use gradcheck::finite_diff_check;
pub use loss::{distill_loss, distill_loss_grad, LossBreakdown};
pub use ops::modify_logits;
pub use targets::{teacher_targets, TargetSet};
pub use train::{build_examples, train_student, train_student_from, BuildStats, DistillSequence};

use crate::counterfactual::align::AlignError;
use crate::model::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum DistillError {
    #[error("invalid distillation config: {0}")]
    InvalidConfig(String),
    #[error("distribution lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("observed token {observed} outside vocabulary of size {vocab}")]
    ObservedOutOfRange { observed: usize, vocab: usize },
    #[error("alignment does not fit the token sequences: {0}")]
    AlignmentMismatch(String),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
