//! Model-level checks against independently computed values.

use era_core::model::train::cross_entropy_grad;
use era_core::model::{generate, perplexity, ModelShape, ReferenceLM, SamplerConfig, Tokenizer, TokenizerMode};
use era_core::model::tokenizer::Vocab;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn direct_nll(model: &ReferenceLM, tokens: &[u32]) -> f64 {
    (0..tokens.len())
        .map(|t| -model.next_logits(&tokens[..t]).as_slice()[tokens[t] as usize])
        .sum()
}

#[test]
fn strided_perplexity_matches_full_context_when_windows_overlap_enough() {
    let model = ReferenceLM::random(ModelShape { context_order: 3, dim: 5 }, 12, 1.0, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let tokens: Vec<u32> = (0..97).map(|_| rng.gen_range(3..12)).collect();
    let direct = (direct_nll(&model, &tokens) / tokens.len() as f64).exp();
    // k <= chunk - stride: every scored token sees its full k-token context.
    for (chunk, stride) in [(200, 200), (16, 8), (16, 13), (8, 4)] {
        let ppl = perplexity(&model, &tokens, chunk, stride).unwrap();
        assert!((ppl - direct).abs() <= 1e-9 * direct, "chunk {chunk} stride {stride}: {ppl} vs {direct}");
    }
    // Non-overlapping windows cut the context at each boundary.
    let cut = perplexity(&model, &tokens, 16, 16).unwrap();
    assert!((cut - direct).abs() > 1e-9);
}

#[test]
fn bias_only_model_predicts_its_bias_everywhere() {
    let v = 9;
    let mut model = ReferenceLM::zeros(ModelShape { context_order: 2, dim: 3 }, v);
    let q: Vec<f64> = (1..=v).map(|i| i as f64 / 45.0).collect();
    for (b, p) in model.output_bias_mut().iter_mut().zip(&q) {
        *b = p.ln();
    }
    for history in [vec![], vec![4], vec![3, 7, 8, 2]] {
        let probs = model.next_logits(&history).probs();
        for (a, b) in probs.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn cross_entropy_gradient_matches_finite_differences() {
    let mut model = ReferenceLM::random(ModelShape { context_order: 2, dim: 3 }, 7, 0.8, 11);
    let window = vec![4, 6];
    let observed = 5;
    let loss = |m: &ReferenceLM| -m.log_probs_for_window(&window)[observed];
    let (ce, dlogits) = cross_entropy_grad(&model.log_probs_for_window(&window), observed);
    assert!((ce - loss(&model)).abs() < 1e-15);
    let mut grad = vec![0.0; model.params().len()];
    model.backward(&window, &dlogits, &mut grad);
    let h = 1e-6;
    for i in 0..grad.len() {
        let x = model.params()[i];
        model.params_mut()[i] = x + h;
        let up = loss(&model);
        model.params_mut()[i] = x - h;
        let down = loss(&model);
        model.params_mut()[i] = x;
        let numeric = (up - down) / (2.0 * h);
        assert!((numeric - grad[i]).abs() <= 1e-7 * (1.0 + numeric.abs()), "param {i}: {numeric} vs {}", grad[i]);
    }
}

fn peaked(v: usize, winner: u32) -> ReferenceLM {
    let mut model = ReferenceLM::zeros(ModelShape { context_order: 1, dim: 2 }, v);
    model.output_bias_mut()[winner as usize] = 30.0;
    model
}

#[test]
fn generation_trace_follows_the_argmax_under_a_tight_nucleus() {
    let vocab = Vocab::from_tokens(["a", " b"].map(String::from)).unwrap();
    let tok = Tokenizer::new(vocab, TokenizerMode::Word);
    let b = tok.vocab().id(" b").unwrap();
    let cfg = SamplerConfig { top_p: 0.5, max_length: 4, seed: 0, ..Default::default() };
    let g = generate(&peaked(tok.vocab_size(), b), &tok, "a", &cfg).unwrap();
    assert_eq!(g.tokens, vec![b; 4]);
    assert_eq!(g.continuation, " b b b b");
    assert!(!g.stopped_on_eos);

    let g = generate(&peaked(tok.vocab_size(), Vocab::EOS_ID), &tok, "a", &cfg).unwrap();
    assert!(g.tokens.is_empty() && g.stopped_on_eos);

    // BOS is masked even when it carries all the mass.
    let g = generate(&peaked(tok.vocab_size(), Vocab::BOS_ID), &tok, "a", &cfg).unwrap();
    assert!(!g.tokens.contains(&Vocab::BOS_ID));
}
