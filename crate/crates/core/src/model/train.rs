use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lm::{context_window, ModelShape, ReferenceLM};
use super::tokenizer::Vocab;
use super::ModelError;

/// Optimizer settings for plain mini-batch gradient descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Number of predicted positions per update.
    pub batch: usize,
    pub seed: u64,
    /// Half-width of the uniform initialization range.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            epochs: 50,
            batch: 32,
            seed: 0,
            init_scale: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(ModelError::InvalidConfig(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch == 0 {
            return Err(ModelError::InvalidConfig("batch must be at least 1".into()));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(ModelError::InvalidConfig("init_scale must be non-negative".into()));
        }
        Ok(())
    }
}

/// Per-epoch mean losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub ce: f64,
    pub kl: f64,
    pub total: f64,
}

/// Loss contribution of a single predicted position.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PositionLoss {
    pub ce: f64,
    pub kl: f64,
    pub total: f64,
}

/// One next-token prediction: a context window and the observed token.
#[derive(Debug, Clone, PartialEq)]
pub struct Position {
    pub window: Vec<u32>,
    pub observed: u32,
}

/// Expands sequences into prediction positions. Each sequence is scored on
/// every token and on a closing EOS.
pub fn positions_for(model_order: usize, sequences: &[Vec<u32>]) -> Vec<Position> {
    let mut out = Vec::new();
    for seq in sequences {
        for t in 0..=seq.len() {
            let observed = seq.get(t).copied().unwrap_or(Vocab::EOS_ID);
            out.push(Position {
                window: context_window(model_order, &seq[..t]),
                observed,
            });
        }
    }
    out
}

/// Mean cross-entropy gradient: `softmax(logits) - onehot(observed)`.
pub fn cross_entropy_grad(log_probs: &[f64], observed: usize) -> (f64, Vec<f64>) {
    let ce = -log_probs[observed];
    let mut grad: Vec<f64> = log_probs.iter().map(|v| v.exp()).collect();
    grad[observed] -= 1.0;
    (ce, grad)
}

/// Runs seeded mini-batch gradient descent over `n` examples.
///
/// `example` computes the loss of example `i` under the current model and
/// accumulates its parameter gradient into the buffer it is handed.
/// Examples are visited in a per-epoch shuffled order drawn from the seed;
/// reduction order is fixed, so runs are bitwise reproducible.
pub fn run_sgd<F>(
    model: &mut ReferenceLM,
    n: usize,
    cfg: &TrainConfig,
    mut example: F,
) -> Result<Vec<EpochLog>, ModelError>
where
    F: FnMut(&ReferenceLM, usize, &mut [f64]) -> PositionLoss,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; model.params().len()];
    let mut logs = Vec::with_capacity(cfg.epochs);
    if n == 0 {
        return Ok(logs);
    }
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sums = PositionLoss::default();
        for (batch_idx, batch) in order.chunks(cfg.batch).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_total = 0.0;
            for &i in batch {
                let loss = example(model, i, &mut grad);
                batch_total += loss.total;
                sums.ce += loss.ce;
                sums.kl += loss.kl;
                sums.total += loss.total;
            }
            if !batch_total.is_finite() {
                return Err(ModelError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    loss: batch_total,
                });
            }
            let scale = cfg.lr / batch.len() as f64;
            for (p, g) in model.params_mut().iter_mut().zip(&grad) {
                *p -= scale * g;
            }
        }
        let log = EpochLog {
            epoch: epoch + 1,
            ce: sums.ce / n as f64,
            kl: sums.kl / n as f64,
            total: sums.total / n as f64,
        };
        log::info!(
            "epoch {}: ce {:.6} kl {:.6} total {:.6}",
            log.epoch,
            log.ce,
            log.kl,
            log.total
        );
        logs.push(log);
    }
    Ok(logs)
}

/// Maximum-likelihood training of a teacher on token sequences.
pub fn train_teacher(
    sequences: &[Vec<u32>],
    vocab_size: usize,
    shape: ModelShape,
    cfg: &TrainConfig,
) -> Result<(ReferenceLM, Vec<EpochLog>), ModelError> {
    if sequences.iter().all(Vec::is_empty) {
        return Err(ModelError::EmptyCorpus);
    }
    cfg.validate()?;
    let mut model = ReferenceLM::random(shape, vocab_size, cfg.init_scale, cfg.seed);
    let positions = positions_for(shape.context_order, sequences);
    let logs = run_sgd(&mut model, positions.len(), cfg, |m, i, grad| {
        let pos = &positions[i];
        let mut lp = m.logits_for_window(&pos.window);
        crate::logprob::log_softmax_in_place(&mut lp);
        let (ce, dlogits) = cross_entropy_grad(&lp, pos.observed as usize);
        m.backward(&pos.window, &dlogits, grad);
        PositionLoss { ce, kl: 0.0, total: ce }
    })?;
    Ok((model, logs))
}

/// Mean cross-entropy of a model over positions (no gradient).
pub fn mean_cross_entropy(model: &ReferenceLM, positions: &[Position]) -> f64 {
    let total: f64 = positions
        .iter()
        .map(|p| -model.log_probs_for_window(&p.window)[p.observed as usize])
        .sum();
    total / positions.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(k: usize, d: usize) -> ModelShape {
        ModelShape {
            context_order: k,
            dim: d,
        }
    }

    #[test]
    fn repeated_bigram_is_learned() {
        // Vocabulary: specials + a(3) + b(4). Every sequence is "a b".
        let seqs = vec![vec![3u32, 4]; 20];
        let cfg = TrainConfig {
            lr: 0.5,
            epochs: 200,
            batch: 8,
            seed: 1,
            init_scale: 0.1,
        };
        let (model, logs) = train_teacher(&seqs, 5, shape(1, 4), &cfg).unwrap();
        let p_b_given_a = model.next_logits(&[3]).prob(4);
        assert!(p_b_given_a >= 0.99, "P(b|a) = {p_b_given_a}");
        assert!(logs.last().unwrap().ce < logs[0].ce);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let seqs = vec![vec![3u32, 4]];
        let cfg = TrainConfig {
            epochs: 0,
            seed: 5,
            ..TrainConfig::default()
        };
        let (model, logs) = train_teacher(&seqs, 5, shape(2, 3), &cfg).unwrap();
        assert!(logs.is_empty());
        assert_eq!(model, ReferenceLM::random(shape(2, 3), 5, cfg.init_scale, 5));
    }

    #[test]
    fn training_is_deterministic() {
        let seqs = vec![vec![3u32, 4, 5], vec![5, 4, 3, 3]];
        let cfg = TrainConfig {
            epochs: 5,
            batch: 3,
            seed: 11,
            ..TrainConfig::default()
        };
        let (a, _) = train_teacher(&seqs, 6, shape(2, 3), &cfg).unwrap();
        let (b, _) = train_teacher(&seqs, 6, shape(2, 3), &cfg).unwrap();
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn divergent_learning_rate_is_reported() {
        let seqs = vec![vec![3u32, 4, 5, 3, 4]; 4];
        let cfg = TrainConfig {
            lr: 1e300,
            epochs: 3,
            batch: 2,
            seed: 0,
            init_scale: 1.0,
        };
        let err = train_teacher(&seqs, 6, shape(1, 2), &cfg).unwrap_err();
        assert!(matches!(err, ModelError::NonFiniteLoss { .. }), "{err}");
    }

    #[test]
    fn invalid_config_is_rejected() {
        let seqs = vec![vec![3u32]];
        for cfg in [
            TrainConfig { lr: 0.0, ..TrainConfig::default() },
            TrainConfig { lr: f64::NAN, ..TrainConfig::default() },
            TrainConfig { batch: 0, ..TrainConfig::default() },
        ] {
            assert!(matches!(
                train_teacher(&seqs, 4, shape(1, 1), &cfg),
                Err(ModelError::InvalidConfig(_))
            ));
        }
        assert!(matches!(
            train_teacher(&[vec![]], 4, shape(1, 1), &TrainConfig::default()),
            Err(ModelError::EmptyCorpus)
        ));
    }

    #[test]
    fn positions_include_closing_eos() {
        let pos = positions_for(2, &[vec![7, 8]]);
        assert_eq!(pos.len(), 3);
        assert_eq!(pos[0].window, vec![Vocab::BOS_ID, Vocab::BOS_ID]);
        assert_eq!(pos[2].window, vec![7, 8]);
        assert_eq!(pos[2].observed, Vocab::EOS_ID);
    }
}
