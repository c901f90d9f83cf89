use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tokenizer::Vocab;
use crate::logprob::{log_softmax_in_place, LogProbVector};

/// The last `order` tokens of `history`, left-padded with BOS.
pub fn context_window(order: usize, history: &[u32]) -> Vec<u32> {
    let mut window = vec![Vocab::BOS_ID; order.saturating_sub(history.len())];
    window.extend_from_slice(&history[history.len().saturating_sub(order)..]);
    window
}

/// Architecture of a [`ReferenceLM`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    /// Number of preceding tokens the model conditions on.
    pub context_order: usize,
    /// Embedding width.
    pub dim: usize,
}

impl Default for ModelShape {
    fn default() -> Self {
        Self {
            context_order: 3,
            dim: 16,
        }
    }
}

/// Fixed-context autoregressive model: the embeddings of the last `k`
/// tokens are concatenated and read out linearly into next-token logits.
///
/// Parameters live in one flat buffer laid out as
/// `[embedding (V*d) | output weights (k*d*V) | output bias (V)]`, which
/// keeps gradient accumulation and finite differencing uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceLM {
    shape: ModelShape,
    vocab_size: usize,
    params: Vec<f64>,
}

impl ReferenceLM {
    pub fn zeros(shape: ModelShape, vocab_size: usize) -> Self {
        assert!(shape.context_order >= 1, "context order must be at least 1");
        assert!(vocab_size >= 1, "vocabulary must not be empty");
        let n = Self::param_count(shape, vocab_size);
        Self {
            shape,
            vocab_size,
            params: vec![0.0; n],
        }
    }

    /// Embeddings and output weights drawn uniformly from `[-scale, scale]`; zero bias.
    pub fn random(shape: ModelShape, vocab_size: usize, scale: f64, seed: u64) -> Self {
        let mut model = Self::zeros(shape, vocab_size);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bias_start = model.bias_offset();
        for p in &mut model.params[..bias_start] {
            *p = rng.gen_range(-scale..=scale);
        }
        model
    }

    pub fn from_parts(
        shape: ModelShape,
        vocab_size: usize,
        embedding: Vec<f64>,
        output_weights: Vec<f64>,
        output_bias: Vec<f64>,
    ) -> Option<Self> {
        let d = shape.dim;
        let k = shape.context_order;
        if k == 0
            || embedding.len() != vocab_size * d
            || output_weights.len() != k * d * vocab_size
            || output_bias.len() != vocab_size
        {
            return None;
        }
        let mut params = embedding;
        params.extend(output_weights);
        params.extend(output_bias);
        Some(Self {
            shape,
            vocab_size,
            params,
        })
    }

    pub fn param_count(shape: ModelShape, vocab_size: usize) -> usize {
        let d = shape.dim;
        vocab_size * d + shape.context_order * d * vocab_size + vocab_size
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn context_order(&self) -> usize {
        self.shape.context_order
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn weights_offset(&self) -> usize {
        self.vocab_size * self.shape.dim
    }

    fn bias_offset(&self) -> usize {
        self.weights_offset() + self.shape.context_order * self.shape.dim * self.vocab_size
    }

    pub fn embedding(&self) -> &[f64] {
        &self.params[..self.weights_offset()]
    }

    pub fn output_weights(&self) -> &[f64] {
        &self.params[self.weights_offset()..self.bias_offset()]
    }

    pub fn output_bias(&self) -> &[f64] {
        &self.params[self.bias_offset()..]
    }

    pub fn output_bias_mut(&mut self) -> &mut [f64] {
        let start = self.bias_offset();
        &mut self.params[start..]
    }

    /// The last `k` tokens of `history`, left-padded with BOS.
    pub fn context_window(&self, history: &[u32]) -> Vec<u32> {
        context_window(self.shape.context_order, history)
    }

    fn hidden(&self, window: &[u32]) -> Vec<f64> {
        let d = self.shape.dim;
        let emb = self.embedding();
        let mut h = Vec::with_capacity(window.len() * d);
        for &tok in window {
            let t = tok as usize;
            h.extend_from_slice(&emb[t * d..(t + 1) * d]);
        }
        h
    }

    /// Raw (unnormalized) logits for a context window of exactly `k` tokens.
    pub fn logits_for_window(&self, window: &[u32]) -> Vec<f64> {
        debug_assert_eq!(window.len(), self.shape.context_order);
        let v = self.vocab_size;
        let h = self.hidden(window);
        let w = self.output_weights();
        let mut logits = self.output_bias().to_vec();
        for (j, hj) in h.iter().enumerate() {
            if *hj == 0.0 {
                continue;
            }
            let row = &w[j * v..(j + 1) * v];
            for (l, wv) in logits.iter_mut().zip(row) {
                *l += hj * wv;
            }
        }
        logits
    }

    /// Log-softmax of the logits for a context window.
    pub fn log_probs_for_window(&self, window: &[u32]) -> Vec<f64> {
        let mut logits = self.logits_for_window(window);
        log_softmax_in_place(&mut logits);
        logits
    }

    /// Next-token distribution given the full preceding history.
    pub fn next_logits(&self, history: &[u32]) -> LogProbVector {
        let window = self.context_window(history);
        LogProbVector::from_unnormalized(self.logits_for_window(&window))
            .expect("finite parameters give a finite distribution")
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d logits`.
    pub fn backward(&self, window: &[u32], dlogits: &[f64], grad: &mut [f64]) {
        let v = self.vocab_size;
        let d = self.shape.dim;
        let h = self.hidden(window);
        let w_off = self.weights_offset();
        let b_off = self.bias_offset();
        for (g, dl) in grad[b_off..].iter_mut().zip(dlogits) {
            *g += dl;
        }
        let w = self.output_weights();
        let mut dh = vec![0.0; h.len()];
        for (j, hj) in h.iter().enumerate() {
            let row = &w[j * v..(j + 1) * v];
            let grow = &mut grad[w_off + j * v..w_off + (j + 1) * v];
            let mut acc = 0.0;
            for ((gw, wv), dl) in grow.iter_mut().zip(row).zip(dlogits) {
                *gw += hj * dl;
                acc += wv * dl;
            }
            dh[j] = acc;
        }
        for (pos, &tok) in window.iter().enumerate() {
            let t = tok as usize;
            for m in 0..d {
                grad[t * d + m] += dh[pos * d + m];
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}
