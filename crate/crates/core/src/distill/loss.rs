use serde::{Deserialize, Serialize};

use super::{DistillConfig, DistillError};
use crate::logprob::{log_softmax_in_place, LogProbVector};

/// Per-position loss terms; `total = alpha_ce * ce + alpha_kl * kl`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub kl: f64,
    pub total: f64,
}

fn tempered_log_softmax(log_probs: &[f64], t: f64) -> Vec<f64> {
    let mut v: Vec<f64> = log_probs.iter().map(|x| x / t).collect();
    log_softmax_in_place(&mut v);
    v
}

/// `KL(p || q)` for log-distributions; zero-probability terms of `p` vanish.
fn kl_divergence(log_p: &[f64], log_q: &[f64]) -> f64 {
    let kl: f64 = log_p
        .iter()
        .zip(log_q)
        .filter(|(lp, _)| **lp > f64::NEG_INFINITY)
        .map(|(lp, lq)| lp.exp() * (lp - lq))
        .sum();
    kl.max(0.0)
}

/// Loss and gradient with respect to the student's raw logits.
///
/// `student` may be raw logits or log-probabilities (softmax is
/// shift-invariant). The KL term compares the temperature-softened target
/// against the temperature-softened student, `KL(target_T || student_T)`,
/// scaled by `T^2` unless disabled.
pub fn distill_loss_grad(
    student: &[f64],
    target: &LogProbVector,
    observed: usize,
    cfg: &DistillConfig,
) -> Result<(LossBreakdown, Vec<f64>), DistillError> {
    let v = student.len();
    if target.len() != v {
        return Err(DistillError::LengthMismatch {
            left: v,
            right: target.len(),
        });
    }
    if observed >= v {
        return Err(DistillError::ObservedOutOfRange { observed, vocab: v });
    }
    let t = cfg.temperature;
    let scale = cfg.kl_scale();

    let mut log_p = student.to_vec();
    log_softmax_in_place(&mut log_p);
    let ce = -log_p[observed];

    let student_t = tempered_log_softmax(&log_p, t);
    let target_t = tempered_log_softmax(target.as_slice(), t);
    let kl = scale * kl_divergence(&target_t, &student_t);

    let mut grad = vec![0.0; v];
    for i in 0..v {
        let ce_g = log_p[i].exp() - if i == observed { 1.0 } else { 0.0 };
        let kl_g = scale / t * (student_t[i].exp() - target_t[i].exp());
        grad[i] = cfg.alpha_ce * ce_g + cfg.alpha_kl * kl_g;
    }
    let total = cfg.alpha_ce * ce + cfg.alpha_kl * kl;
    Ok((LossBreakdown { ce, kl, total }, grad))
}

/// Loss terms only.
pub fn distill_loss(
    student: &LogProbVector,
    target: &LogProbVector,
    observed: usize,
    cfg: &DistillConfig,
) -> Result<LossBreakdown, DistillError> {
    distill_loss_grad(student.as_slice(), target, observed, cfg).map(|(l, _)| l)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(p: &[f64]) -> LogProbVector {
        LogProbVector::from_probs(p).unwrap()
    }

    fn t1() -> DistillConfig {
        DistillConfig {
            temperature: 1.0,
            ..Default::default()
        }
    }

    #[test]
    fn kl_of_matching_distributions_is_zero() {
        let a = lp(&[0.2, 0.5, 0.3]);
        for t in [0.5, 1.0, 2.0, 7.0] {
            let cfg = DistillConfig { temperature: t, ..Default::default() };
            assert!(distill_loss(&a, &a, 1, &cfg).unwrap().kl.abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_student_cross_entropy() {
        let l = distill_loss(&lp(&[0.5, 0.5]), &lp(&[0.5, 0.5]), 0, &t1()).unwrap();
        assert!((l.ce - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn kl_worked_example() {
        let l = distill_loss(&lp(&[0.9, 0.1]), &lp(&[0.5, 0.5]), 0, &t1()).unwrap();
        let expected = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln();
        assert!((l.kl - expected).abs() < 1e-12);
        assert!((l.kl - 0.510_825_623_765_990_7).abs() < 1e-9);
        assert!((l.total - (0.5 * l.ce + 0.5 * l.kl)).abs() < 1e-15);
    }

    #[test]
    fn temperature_scaling_flag() {
        let s = lp(&[0.9, 0.1]);
        let tg = lp(&[0.5, 0.5]);
        let on = DistillConfig::default();
        let off = DistillConfig { scale_kl_by_t2: false, ..Default::default() };
        let a = distill_loss(&s, &tg, 0, &on).unwrap().kl;
        let b = distill_loss(&s, &tg, 0, &off).unwrap().kl;
        assert!((a - 4.0 * b).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_difference_on_logits() {
        let cfg = DistillConfig { temperature: 1.7, ..Default::default() };
        let z = [0.3, -1.2, 0.8, 0.0];
        let target = lp(&[0.1, 0.2, 0.3, 0.4]);
        let (_, g) = distill_loss_grad(&z, &target, 2, &cfg).unwrap();
        let h = 1e-6;
        for i in 0..z.len() {
            let mut up = z;
            let mut dn = z;
            up[i] += h;
            dn[i] -= h;
            let fu = distill_loss_grad(&up, &target, 2, &cfg).unwrap().0.total;
            let fd = distill_loss_grad(&dn, &target, 2, &cfg).unwrap().0.total;
            assert!(((fu - fd) / (2.0 * h) - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn out_of_range_inputs_are_errors() {
        let a = lp(&[0.5, 0.5]);
        assert!(matches!(
            distill_loss(&a, &a, 2, &t1()),
            Err(DistillError::ObservedOutOfRange { observed: 2, vocab: 2 })
        ));
        assert!(distill_loss(&a, &lp(&[1.0]), 0, &t1()).is_err());
    }
}
