use super::{modify_logits, DistillConfig, DistillError, ModFn};
use crate::counterfactual::TokenAlignment;
use crate::logprob::LogProbVector;
use crate::model::ReferenceLM;

/// Distillation targets for one record. Each list has one entry per
/// prediction position: every token plus the closing EOS.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pub original: Vec<LogProbVector>,
    /// Present when `modify_both` is set.
    pub counterfactual: Option<Vec<LogProbVector>>,
}

/// Teacher distributions at every prediction position of `tokens`.
pub fn plain_targets(teacher: &ReferenceLM, tokens: &[u32]) -> Vec<LogProbVector> {
    (0..=tokens.len()).map(|t| teacher.next_logits(&tokens[..t])).collect()
}

/// Aligned position pairs extended with the closing EOS positions.
fn prediction_pairs(alignment: &TokenAlignment, n_orig: usize, n_cf: usize) -> Vec<(usize, usize)> {
    let mut pairs = alignment.pairs.clone();
    pairs.push((n_orig, n_cf));
    pairs
}

/// Modified teacher targets for an original sequence and its counterfactual.
///
/// At aligned positions `(t, s)` the target is `f(z_t, z'_s)`; unaligned
/// positions keep the plain teacher distribution. With `modify_both`, the
/// counterfactual sequence gets `f(z'_s, z_t)` at the same pairs.
pub fn teacher_targets(
    teacher: &ReferenceLM,
    original: &[u32],
    counterfactual: &[u32],
    alignment: &TokenAlignment,
    cfg: &DistillConfig,
) -> Result<TargetSet, DistillError> {
    alignment
        .check(original.len(), counterfactual.len())
        .map_err(DistillError::AlignmentMismatch)?;
    let z = plain_targets(teacher, original);
    let z_cf = plain_targets(teacher, counterfactual);
    if cfg.mod_fn == ModFn::None {
        return Ok(TargetSet {
            original: z,
            counterfactual: cfg.modify_both.then_some(z_cf),
        });
    }
    let pairs = prediction_pairs(alignment, original.len(), counterfactual.len());
    let mut out = z.clone();
    for &(t, s) in &pairs {
        out[t] = modify_logits(&z[t], &z_cf[s], cfg.mod_fn)?;
    }
    let cf_out = if cfg.modify_both {
        let mut cf_out = z_cf.clone();
        for &(t, s) in &pairs {
            cf_out[s] = modify_logits(&z_cf[s], &z[t], cfg.mod_fn)?;
        }
        Some(cf_out)
    } else {
        None
    };
    Ok(TargetSet {
        original: out,
        counterfactual: cf_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterfactual::align::align_regions;
    use crate::model::ModelShape;

    /// Bigram teacher over {BOS, EOS, UNK, he=3, she=4, x=5, y=6} where
    /// P(.|he) and P(.|she) are set by hand through the bias and weights.
    fn tabular_teacher() -> ReferenceLM {
        let v = 7;
        let shape = ModelShape { context_order: 1, dim: v };
        // One-hot embeddings make the readout a lookup table of logits.
        let mut emb = vec![0.0; v * v];
        for i in 0..v {
            emb[i * v + i] = 1.0;
        }
        let mut w = vec![0.0; v * v];
        let row = |w: &mut Vec<f64>, ctx: usize, probs: [f64; 7]| {
            for (j, p) in probs.iter().enumerate() {
                w[ctx * v + j] = if *p > 0.0 { p.ln() } else { -50.0 };
            }
        };
        row(&mut w, 3, [0.0, 0.1, 0.0, 0.0, 0.0, 0.6, 0.3]);
        row(&mut w, 4, [0.0, 0.1, 0.0, 0.0, 0.0, 0.2, 0.7]);
        ReferenceLM::from_parts(shape, v, emb, w, vec![0.0; v]).unwrap()
    }

    fn identity_alignment(n: usize) -> TokenAlignment {
        let r: Vec<usize> = (0..n).collect();
        align_regions(&r, &r)
    }

    #[test]
    fn swap_target_equals_counterfactual_teacher() {
        let teacher = tabular_teacher();
        let (orig, cf) = ([3u32, 5], [4u32, 5]);
        let cfg = DistillConfig { mod_fn: ModFn::Swap, ..Default::default() };
        let set = teacher_targets(&teacher, &orig, &cf, &identity_alignment(2), &cfg).unwrap();
        let expected = teacher.next_logits(&cf[..1]);
        for (a, b) in set.original[1].as_slice().iter().zip(expected.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(set.counterfactual.unwrap()[1], teacher.next_logits(&orig[..1]));
    }

    #[test]
    fn exp_mean_averages_hand_set_conditionals() {
        let teacher = tabular_teacher();
        let cfg = DistillConfig { mod_fn: ModFn::ExpMean, ..Default::default() };
        let set = teacher_targets(&teacher, &[3, 5], &[4, 5], &identity_alignment(2), &cfg).unwrap();
        let p = set.original[1].probs();
        let ph = teacher.next_logits(&[3]).probs();
        let ps = teacher.next_logits(&[4]).probs();
        for i in 0..7 {
            assert!((p[i] - 0.5 * (ph[i] + ps[i])).abs() < 1e-12);
        }
        assert!((p[5] - 0.4).abs() < 1e-9 && (p[6] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn none_gives_plain_teacher_targets() {
        let teacher = tabular_teacher();
        let cfg = DistillConfig::default();
        let set = teacher_targets(&teacher, &[3, 5], &[4, 5], &identity_alignment(2), &cfg).unwrap();
        assert_eq!(set.original, plain_targets(&teacher, &[3, 5]));
    }

    #[test]
    fn unaligned_positions_keep_teacher_distribution() {
        let teacher = tabular_teacher();
        // Original token 1 has no counterpart.
        let alignment = align_regions(&[0, 1, 1], &[0, 1]);
        let cfg = DistillConfig { mod_fn: ModFn::Swap, modify_both: false, ..Default::default() };
        let orig = [3u32, 5, 6];
        let set = teacher_targets(&teacher, &orig, &[4, 5], &alignment, &cfg).unwrap();
        assert_eq!(set.original[2], teacher.next_logits(&orig[..2]));
        assert_eq!(set.original.len(), 4);
        assert!(set.counterfactual.is_none());
        // Closing EOS positions are paired.
        assert_eq!(set.original[3], teacher.next_logits(&[4, 5]));
    }

    #[test]
    fn bad_alignment_is_rejected() {
        let teacher = tabular_teacher();
        let cfg = DistillConfig { mod_fn: ModFn::Max, ..Default::default() };
        let err = teacher_targets(&teacher, &[3], &[4, 5], &identity_alignment(2), &cfg);
        assert!(matches!(err, Err(DistillError::AlignmentMismatch(_))));
    }
}
