use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{distill_loss_grad, modify_logits, DistillConfig};
use crate::logprob::LogProbVector;
use crate::model::{ModelShape, ReferenceLM};

/// Central-difference step.
pub const STEP: f64 = 1e-5;
/// Coordinates compared per trial.
const COORDS_PER_TRIAL: usize = 24;

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Total loss of one position as a function of the parameters.
fn loss_at(model: &ReferenceLM, window: &[u32], target: &LogProbVector, observed: usize, cfg: &DistillConfig) -> f64 {
    let logits = model.logits_for_window(window);
    distill_loss_grad(&logits, target, observed, cfg).expect("shapes agree").0.total
}

/// Compares the analytic gradient of the total distillation loss with
/// central differences on random small models (`V <= 20`, `d <= 8`,
/// `k <= 3`). Each target is `cfg.mod_fn` applied to two random teacher
/// distributions. Returns the worst relative error.
///
/// Coordinates are drawn from the parameters that influence the loss: the
/// embeddings of the context tokens, the readout weights and the bias.
pub fn finite_diff_check(cfg: &DistillConfig, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let v = rng.gen_range(4..=20);
        let d = rng.gen_range(1..=8);
        let k = rng.gen_range(1..=3);
        let shape = ModelShape { context_order: k, dim: d };
        let mut model = ReferenceLM::random(shape, v, 0.5, rng.gen());
        for b in model.output_bias_mut() {
            *b = rng.gen_range(-0.5..0.5);
        }
        let window: Vec<u32> = (0..k).map(|_| rng.gen_range(0..v as u32)).collect();
        let mut teacher = || {
            let logits: Vec<f64> = (0..v).map(|_| rng.gen_range(-2.0..2.0)).collect();
            LogProbVector::from_unnormalized(logits).expect("finite")
        };
        let (z, z_cf) = (teacher(), teacher());
        let target = modify_logits(&z, &z_cf, cfg.mod_fn).expect("equal lengths");
        let observed = rng.gen_range(0..v);

        let mut grad = vec![0.0; model.params().len()];
        let logits = model.logits_for_window(&window);
        let (_, dlogits) = distill_loss_grad(&logits, &target, observed, cfg).expect("shapes agree");
        model.backward(&window, &dlogits, &mut grad);

        let mut active: Vec<usize> = window
            .iter()
            .flat_map(|&t| (t as usize * d)..(t as usize + 1) * d)
            .collect();
        active.extend(v * d..model.params().len());
        active.sort_unstable();
        active.dedup();

        for _ in 0..COORDS_PER_TRIAL {
            let c = active[rng.gen_range(0..active.len())];
            let orig = model.params()[c];
            model.params_mut()[c] = orig + STEP;
            let up = loss_at(&model, &window, &target, observed, cfg);
            model.params_mut()[c] = orig - STEP;
            let down = loss_at(&model, &window, &target, observed, cfg);
            model.params_mut()[c] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            worst = worst.max(relative_error(grad[c], numeric));
        }
    }
    worst
}
