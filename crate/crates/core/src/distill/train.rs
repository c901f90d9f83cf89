use serde::{Deserialize, Serialize};

use super::targets::plain_targets;
use super::{distill_loss_grad, teacher_targets, DistillConfig, DistillError, ModFn};
use crate::counterfactual::{align_tokens, Rewriter};
use crate::logprob::LogProbVector;
use crate::model::train::{run_sgd, PositionLoss};
use crate::model::{context_window, EpochLog, ModelShape, ReferenceLM, Tokenizer, Vocab};

/// A training sequence with one target distribution per prediction
/// position (`tokens.len() + 1`, the last one for the closing EOS).
#[derive(Debug, Clone, PartialEq)]
pub struct DistillSequence {
    pub tokens: Vec<u32>,
    pub targets: Vec<LogProbVector>,
    pub is_counterfactual: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BuildStats {
    pub texts: usize,
    pub skipped_empty: usize,
    pub with_counterfactual: usize,
    pub sequences: usize,
}

/// Tokenizes a corpus and attaches teacher targets.
///
/// When `cfg.mod_fn` is not `None` or `cfg.augment` is set, each text is
/// rewritten; texts without a counterfactual keep plain teacher targets.
/// With `augment`, counterfactual sequences follow their originals.
pub fn build_examples<S: AsRef<str>>(
    teacher: &ReferenceLM,
    tokenizer: &Tokenizer,
    texts: &[S],
    rewriter: Option<&Rewriter<'_>>,
    cfg: &DistillConfig,
) -> Result<(Vec<DistillSequence>, BuildStats), DistillError> {
    cfg.validate()?;
    let needs_cf = cfg.augment || cfg.mod_fn != ModFn::None;
    if needs_cf && rewriter.is_none() {
        return Err(DistillError::InvalidConfig(
            "logit modification or augmentation needs a lexicon".into(),
        ));
    }
    let mut stats = BuildStats::default();
    let mut out = Vec::new();
    for (i, text) in texts.iter().enumerate() {
        let text = text.as_ref();
        stats.texts += 1;
        let record = if needs_cf {
            rewriter.and_then(|r| r.rewrite(text, i as u64))
        } else {
            None
        };
        let Some(record) = record else {
            let tokens = tokenizer.tokenize(text);
            if tokens.is_empty() {
                stats.skipped_empty += 1;
                continue;
            }
            let targets = plain_targets(teacher, &tokens);
            out.push(DistillSequence { tokens, targets, is_counterfactual: false });
            continue;
        };
        stats.with_counterfactual += 1;
        let aligned = align_tokens(&record, tokenizer)?;
        let set = teacher_targets(
            teacher,
            &aligned.original.ids,
            &aligned.counterfactual.ids,
            &aligned.alignment,
            cfg,
        )?;
        out.push(DistillSequence {
            tokens: aligned.original.ids,
            targets: set.original,
            is_counterfactual: false,
        });
        if cfg.augment {
            let cf_tokens = aligned.counterfactual.ids;
            let targets = set
                .counterfactual
                .unwrap_or_else(|| plain_targets(teacher, &cf_tokens));
            out.push(DistillSequence { tokens: cf_tokens, targets, is_counterfactual: true });
        }
    }
    stats.sequences = out.len();
    Ok((out, stats))
}

struct Example<'a> {
    window: Vec<u32>,
    observed: usize,
    target: &'a LogProbVector,
}

/// Distills a freshly initialized student of the given shape.
pub fn train_student(
    sequences: &[DistillSequence],
    vocab_size: usize,
    shape: ModelShape,
    cfg: &DistillConfig,
) -> Result<(ReferenceLM, Vec<EpochLog>), DistillError> {
    let student = ReferenceLM::random(shape, vocab_size, cfg.init_scale, cfg.seed);
    train_student_from(student, sequences, cfg)
}

/// Distills starting from the given student parameters.
pub fn train_student_from(
    mut student: ReferenceLM,
    sequences: &[DistillSequence],
    cfg: &DistillConfig,
) -> Result<(ReferenceLM, Vec<EpochLog>), DistillError> {
    cfg.validate()?;
    let v = student.vocab_size();
    let k = student.context_order();
    let mut examples = Vec::new();
    for (n, seq) in sequences.iter().enumerate() {
        if seq.targets.len() != seq.tokens.len() + 1 {
            return Err(DistillError::AlignmentMismatch(format!(
                "sequence {n}: {} targets for {} tokens",
                seq.targets.len(),
                seq.tokens.len()
            )));
        }
        for t in 0..=seq.tokens.len() {
            let observed = seq.tokens.get(t).copied().unwrap_or(Vocab::EOS_ID) as usize;
            if observed >= v {
                return Err(DistillError::ObservedOutOfRange { observed, vocab: v });
            }
            let target = &seq.targets[t];
            if target.len() != v {
                return Err(DistillError::LengthMismatch { left: v, right: target.len() });
            }
            examples.push(Example {
                window: context_window(k, &seq.tokens[..t]),
                observed,
                target,
            });
        }
    }
    let logs = run_sgd(&mut student, examples.len(), &cfg.train_config(), |m, i, grad| {
        let ex = &examples[i];
        let logits = m.logits_for_window(&ex.window);
        let (loss, dlogits) =
            distill_loss_grad(&logits, ex.target, ex.observed, cfg).expect("validated above");
        m.backward(&ex.window, &dlogits, grad);
        PositionLoss { ce: loss.ce, kl: loss.kl, total: loss.total }
    })?;
    Ok((student, logs))
}
