use super::{DistillError, ModFn};
use crate::logprob::{log_add_exp, LogProbVector};

/// Combines the teacher's original-context distribution `z` with its
/// counterfactual-context distribution `z_cf`, then renormalizes.
///
/// `ModFn::None` returns `z` unchanged. When the combination leaves no
/// probability mass (disjoint supports under `Mean` or `Blend`), the result
/// is the arithmetic mixture of the two distributions.
pub fn modify_logits(
    z: &LogProbVector,
    z_cf: &LogProbVector,
    f: ModFn,
) -> Result<LogProbVector, DistillError> {
    if z.len() != z_cf.len() {
        return Err(DistillError::LengthMismatch {
            left: z.len(),
            right: z_cf.len(),
        });
    }
    let pairs = z.as_slice().iter().zip(z_cf.as_slice());
    let combined: Vec<f64> = match f {
        ModFn::None => return Ok(z.clone()),
        ModFn::Swap => return Ok(z_cf.clone()),
        ModFn::Max => pairs.map(|(a, b)| a.max(*b)).collect(),
        ModFn::Mean => pairs.map(|(a, b)| 0.5 * (a + b)).collect(),
        ModFn::ExpMean => pairs
            .map(|(a, b)| log_add_exp(*a, *b) - std::f64::consts::LN_2)
            .collect(),
        ModFn::Blend(l) => pairs
            .map(|(a, b)| {
                // Keep -inf entries finite-safe: 0 * -inf is NaN.
                let x = if l == 0.0 { 0.0 } else { l * a };
                let y = if l == 1.0 { 0.0 } else { (1.0 - l) * b };
                x + y
            })
            .collect(),
    };
    Ok(LogProbVector::from_unnormalized(combined).unwrap_or_else(|| {
        let mix = z
            .as_slice()
            .iter()
            .zip(z_cf.as_slice())
            .map(|(a, b)| log_add_exp(*a, *b) - std::f64::consts::LN_2)
            .collect();
        LogProbVector::from_unnormalized(mix).expect("normalized inputs carry mass")
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(p: &[f64]) -> LogProbVector {
        LogProbVector::from_probs(p).unwrap()
    }

    fn assert_probs(v: &LogProbVector, expected: &[f64]) {
        for (a, b) in v.probs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{:?} vs {expected:?}", v.probs());
        }
        assert!(v.is_normalized());
    }

    #[test]
    fn worked_three_token_example() {
        let z = lp(&[0.8, 0.1, 0.1]);
        let zc = lp(&[0.2, 0.7, 0.1]);
        assert_probs(&modify_logits(&z, &zc, ModFn::ExpMean).unwrap(), &[0.5, 0.4, 0.1]);
        assert_probs(&modify_logits(&z, &zc, ModFn::Max).unwrap(), &[0.5, 0.4375, 0.0625]);
        assert_probs(&modify_logits(&z, &zc, ModFn::Swap).unwrap(), &[0.2, 0.7, 0.1]);
        // Geometric mean: sqrt(.16), sqrt(.07), .1 renormalized.
        let g = [0.16f64.sqrt(), 0.07f64.sqrt(), 0.1];
        let s: f64 = g.iter().sum();
        assert_probs(
            &modify_logits(&z, &zc, ModFn::Mean).unwrap(),
            &g.map(|x| x / s),
        );
    }

    #[test]
    fn mean_suppresses_disagreement_relative_to_exp_mean() {
        let z = lp(&[0.8, 0.1, 0.1]);
        let zc = lp(&[0.2, 0.7, 0.1]);
        let mean = modify_logits(&z, &zc, ModFn::Mean).unwrap().probs();
        let exp_mean = modify_logits(&z, &zc, ModFn::ExpMean).unwrap().probs();
        // Token 1 has the sharpest disagreement (0.1 vs 0.7).
        assert!(mean[1] < exp_mean[1]);
        assert!((mean[1] - 0.07f64.sqrt() / (0.4 + 0.07f64.sqrt() + 0.1)).abs() < 1e-12);
        // Before renormalization the geometric mean never exceeds the arithmetic one.
        for (a, b) in z.probs().iter().zip(zc.probs()) {
            assert!((a * b).sqrt() <= 0.5 * (a + b));
        }
    }

    #[test]
    fn identical_inputs_are_fixed_points() {
        let z = lp(&[0.3, 0.3, 0.4]);
        for f in [ModFn::Max, ModFn::Mean, ModFn::ExpMean, ModFn::Swap, ModFn::Blend(0.3), ModFn::None] {
            let out = modify_logits(&z, &z, f).unwrap();
            for (a, b) in out.as_slice().iter().zip(z.as_slice()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn blend_endpoints() {
        let z = lp(&[0.6, 0.4]);
        let zc = lp(&[0.1, 0.9]);
        assert_eq!(modify_logits(&z, &zc, ModFn::Blend(0.0)).unwrap(), zc);
        assert_probs(&modify_logits(&z, &zc, ModFn::Blend(1.0)).unwrap(), &[0.6, 0.4]);
    }

    #[test]
    fn zero_probability_entries_stay_valid() {
        let z = lp(&[1.0, 0.0]);
        let zc = lp(&[0.0, 1.0]);
        for f in [ModFn::Max, ModFn::ExpMean, ModFn::Blend(0.5)] {
            let out = modify_logits(&z, &zc, f).unwrap();
            assert!(out.is_normalized(), "{f}");
        }
        assert_probs(&modify_logits(&z, &zc, ModFn::ExpMean).unwrap(), &[0.5, 0.5]);
        assert_probs(&modify_logits(&z, &zc, ModFn::Mean).unwrap(), &[0.5, 0.5]);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(matches!(
            modify_logits(&lp(&[1.0]), &lp(&[0.5, 0.5]), ModFn::Max),
            Err(DistillError::LengthMismatch { left: 1, right: 2 })
        ));
    }
}
