use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::OnceLock;

use era_core::counterfactual::{align_tokens, rewrite_gender, rewrite_race};
use era_core::distill::{distill_loss, modify_logits, teacher_targets, DistillConfig, ModFn};
use era_core::lexicon::{GroupLexicon, SwapLexicon};
use era_core::logprob::{logsumexp, LogProbVector};
use era_core::metrics::ceat::{ceat_ces, random_effects, CeatTest, WordSet};
use era_core::metrics::embeddings::{cosine, EmbeddingTable};
use era_core::metrics::{effect_size, equitability, tprd, weat_association};
use era_core::model::{ModelShape, ReferenceLM, Tokenizer, TokenizerMode};
use proptest::prelude::*;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn gender() -> &'static SwapLexicon {
    static LEX: OnceLock<SwapLexicon> = OnceLock::new();
    LEX.get_or_init(|| SwapLexicon::load(data("gender_pairs.tsv")).unwrap())
}

fn race() -> &'static GroupLexicon {
    static LEX: OnceLock<GroupLexicon> = OnceLock::new();
    LEX.get_or_init(|| GroupLexicon::load(data("race_words.json")).unwrap())
}

const FILLERS: &[&str] = &["the", "a", "works", "as", "engineer", "and", "kids", "of", "two", "in", "band", "rock"];
const GENDERED: &[&str] = &[
    "she", "He", "her", "him", "his", "mother", "Father", "sister", "brothers", "she'll", "he's",
    "Queen", "kings", "girlfriend", "waitress", "Mrs", "madam", "heiress", "heir",
];
const SEPARATORS: &[&str] = &[" ", ", ", ". ", " \"", "\" ", " (", ") ", "; "];

fn sentence() -> impl Strategy<Value = String> {
    let word = prop_oneof![
        2 => proptest::sample::select(FILLERS).prop_map(str::to_string),
        1 => proptest::sample::select(GENDERED).prop_map(str::to_string),
    ];
    proptest::collection::vec((word, proptest::sample::select(SEPARATORS)), 1..12).prop_map(|parts| {
        let mut s = String::new();
        for (w, sep) in parts {
            s.push_str(&w);
            s.push_str(sep);
        }
        s
    })
}

fn distribution(n: usize) -> impl Strategy<Value = LogProbVector> {
    proptest::collection::vec(-8.0f64..3.0, n).prop_map(|v| LogProbVector::from_unnormalized(v).unwrap())
}

fn unit_vectors(count: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, dim), count).prop_filter(
        "non-degenerate vectors",
        |vs| vs.iter().all(|v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn gender_rewrite_is_an_involution(text in sentence()) {
        if let Some(once) = rewrite_gender(&text, gender()) {
            let twice = rewrite_gender(&once.counterfactual, gender()).expect("swapped words are still gendered");
            prop_assert_eq!(&twice.counterfactual, &text);
            prop_assert!(once.validate().is_ok());
        }
    }

    #[test]
    fn rewrites_preserve_remainders(text in sentence(), seed in any::<u64>()) {
        if let Some(r) = rewrite_gender(&text, gender()) {
            prop_assert!(r.validate().is_ok(), "{:?}", r.validate());
        }
        let named = format!("{text} Vazquez met Banks, a korean-american and Asian friend.");
        let r = rewrite_race(&named, race(), seed).unwrap();
        prop_assert!(r.validate().is_ok());
        for s in &r.substitutions {
            let a = race().entry(&s.original).unwrap();
            let b = race().entry(&s.replacement).unwrap();
            prop_assert_eq!(a.category, b.category);
            prop_assert_ne!(a.group, b.group);
        }
    }

    #[test]
    fn alignment_is_monotone_and_partitions(text in sentence(), subword in any::<bool>(), cap in 5usize..60) {
        if let Some(r) = rewrite_gender(&text, gender()) {
            let corpus = [r.original.as_str(), r.counterfactual.as_str(), "a b c"];
            let mode = if subword { TokenizerMode::Subword } else { TokenizerMode::Word };
            let tok = Tokenizer::build(&corpus[2..], cap, mode).unwrap();
            let a = align_tokens(&r, &tok).unwrap();
            prop_assert!(a.alignment.check(a.original.ids.len(), a.counterfactual.ids.len()).is_ok());
            let full = Tokenizer::build(&corpus, 500, mode).unwrap();
            let a = align_tokens(&r, &full).unwrap();
            prop_assert!(a.alignment.check(a.original.ids.len(), a.counterfactual.ids.len()).is_ok());
        }
    }

    #[test]
    fn subword_tokenizer_round_trips(text in "[a-z ,.']{0,40}") {
        let tok = Tokenizer::build(&[text.as_str(), "the cat, the hat."], 30, TokenizerMode::Subword).unwrap();
        prop_assert_eq!(tok.detokenize(&tok.tokenize(&text)), text);
    }

    #[test]
    fn modified_targets_are_valid(z in distribution(6), zc in distribution(6), lambda in 0.0f64..=1.0) {
        for f in [ModFn::Max, ModFn::Mean, ModFn::ExpMean, ModFn::Swap, ModFn::Blend(lambda)] {
            let out = modify_logits(&z, &zc, f).unwrap();
            prop_assert!(logsumexp(out.as_slice()).abs() <= 1e-9);
            prop_assert!(out.as_slice().iter().all(|v| *v <= 1e-12));
            let same = modify_logits(&z, &z, f).unwrap();
            for (a, b) in same.as_slice().iter().zip(z.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn exp_mean_lies_between_inputs(z in distribution(8), zc in distribution(8)) {
        let out = modify_logits(&z, &zc, ModFn::ExpMean).unwrap().probs();
        for ((o, a), b) in out.iter().zip(z.probs()).zip(zc.probs()) {
            prop_assert!(*o >= a.min(b) - 1e-12 && *o <= a.max(b) + 1e-12);
        }
    }

    #[test]
    fn kl_is_nonnegative_and_zero_only_at_match(s in distribution(5), t in distribution(5), temp in 0.3f64..5.0) {
        let cfg = DistillConfig { temperature: temp, ..Default::default() };
        let l = distill_loss(&s, &t, 0, &cfg).unwrap();
        prop_assert!(l.kl >= 0.0);
        prop_assert!((l.total - (cfg.alpha_ce * l.ce + cfg.alpha_kl * l.kl)).abs() < 1e-12);
        prop_assert!(distill_loss(&s, &s, 0, &cfg).unwrap().kl <= 1e-9);
        if s.total_variation(&t) > 1e-3 {
            prop_assert!(l.kl > 1e-9);
        }
    }

    #[test]
    fn swap_targets_are_symmetric(seed in any::<u64>(), a in 3u32..9, b in 3u32..9, c in 3u32..9) {
        let teacher = ReferenceLM::random(ModelShape { context_order: 2, dim: 3 }, 9, 1.0, seed);
        let lex = SwapLexicon::parse("she\the\n").unwrap();
        let rec = rewrite_gender("she x", &lex).unwrap();
        let tok = Tokenizer::build(&["she x", "he x"], 20, TokenizerMode::Word).unwrap();
        let al = align_tokens(&rec, &tok).unwrap().alignment;
        let _ = (a, b, c);
        let cfg = DistillConfig { mod_fn: ModFn::Swap, modify_both: true, ..Default::default() };
        let orig = tok.tokenize("she x");
        let cf = tok.tokenize("he x");
        let teacher = ReferenceLM::random(teacher.shape(), tok.vocab_size(), 1.0, seed);
        let fwd = teacher_targets(&teacher, &orig, &cf, &al, &cfg).unwrap();
        let rev_rec = rewrite_gender("he x", &lex).unwrap();
        let rev_al = align_tokens(&rev_rec, &tok).unwrap().alignment;
        let rev = teacher_targets(&teacher, &cf, &orig, &rev_al, &cfg).unwrap();
        prop_assert_eq!(&fwd.original, rev.counterfactual.as_ref().unwrap());
        prop_assert_eq!(fwd.counterfactual.as_ref().unwrap(), &rev.original);
    }

    #[test]
    fn ces_lies_within_sample_range(es in proptest::collection::vec(-2.0f64..2.0, 1..30), seed in any::<u64>()) {
        let vars: Vec<f64> = es.iter().enumerate().map(|(i, _)| 0.05 + ((seed >> (i % 60)) & 7) as f64 * 0.1).collect();
        let r = random_effects(&es, &vars).unwrap();
        let lo = es.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = es.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(r.ces >= lo - 1e-12 && r.ces <= hi + 1e-12);
        prop_assert!(r.tau2 >= 0.0);
    }

    #[test]
    fn equitability_bounds_and_symmetry(m in 0usize..50, f in 0usize..50) {
        let e = equitability(m, f);
        prop_assert!((0.0..=1.0).contains(&e));
        prop_assert_eq!(e, equitability(f, m));
        prop_assert_eq!(e == 1.0, m == f);
    }

    #[test]
    fn weat_matches_brute_force(vs in unit_vectors(11, 4)) {
        let names: Vec<String> = (0..vs.len()).map(|i| format!("w{i}")).collect();
        let emb = EmbeddingTable::from_entries(names.iter().cloned().zip(vs.iter().cloned())).unwrap();
        let a: Vec<&str> = names[1..4].iter().map(String::as_str).collect();
        let b: Vec<&str> = names[4..7].iter().map(String::as_str).collect();
        let got = weat_association("w0", &a, &b, &emb).unwrap();
        // Brute force: explicit dot products and norms.
        let cos = |x: &[f64], y: &[f64]| {
            let d: f64 = (0..x.len()).map(|i| x[i] * y[i]).sum();
            let nx = (0..x.len()).map(|i| x[i] * x[i]).sum::<f64>().sqrt();
            let ny = (0..y.len()).map(|i| y[i] * y[i]).sum::<f64>().sqrt();
            d / (nx * ny)
        };
        let ma = (1..4).map(|i| cos(&vs[0], &vs[i])).sum::<f64>() / 3.0;
        let mb = (4..7).map(|i| cos(&vs[0], &vs[i])).sum::<f64>() / 3.0;
        prop_assert!((got - (ma - mb)).abs() <= 1e-12);
        prop_assert!((cosine(&vs[0], &vs[1]) - cos(&vs[0], &vs[1])).abs() <= 1e-12);
    }

    #[test]
    fn effect_size_is_scale_invariant(vs in unit_vectors(8, 3), scale in 0.01f64..100.0) {
        let names: Vec<String> = (0..8).map(|i| format!("w{i}")).collect();
        let emb = EmbeddingTable::from_entries(names.iter().cloned().zip(vs.iter().cloned())).unwrap();
        let scaled = EmbeddingTable::from_entries(
            names.iter().cloned().zip(vs.iter().map(|v| v.iter().map(|x| x * scale).collect())),
        ).unwrap();
        let n: Vec<&str> = names.iter().map(String::as_str).collect();
        let (x, y, a, b) = (&n[0..2], &n[2..4], &n[4..6], &n[6..8]);
        if let (Ok(e1), Ok(e2)) = (effect_size(x, y, a, b, &emb), effect_size(x, y, a, b, &scaled)) {
            prop_assert!((e1 - e2).abs() <= 1e-9 * e1.abs().max(1.0));
        }
    }

    #[test]
    fn tprd_relabel_and_swap_invariant(rates in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..10)) {
        let named: BTreeMap<String, (f64, f64)> = rates.iter().enumerate().map(|(i, r)| (format!("p{i}"), *r)).collect();
        let relabeled: BTreeMap<String, (f64, f64)> = rates.iter().enumerate().map(|(i, r)| (format!("z{}", 100 - i), *r)).collect();
        let swapped: BTreeMap<String, (f64, f64)> = named.iter().map(|(k, (m, f))| (k.clone(), (*f, *m))).collect();
        let t = tprd(&named).unwrap().tprd;
        prop_assert!((t - tprd(&relabeled).unwrap().tprd).abs() < 1e-12);
        prop_assert_eq!(t, tprd(&swapped).unwrap().tprd);
    }

    #[test]
    fn next_logits_always_normalized(seed in any::<u64>(), hist in proptest::collection::vec(0u32..12, 0..6), scale in 0.0f64..20.0) {
        let m = ReferenceLM::random(ModelShape { context_order: 3, dim: 4 }, 12, scale, seed);
        prop_assert!(logsumexp(m.next_logits(&hist).as_slice()).abs() <= 1e-9);
    }
}

#[test]
fn ceat_is_reproducible_and_bounded() {
    let set = |l: &str, w: &[&str]| WordSet { label: l.into(), words: w.iter().map(|s| s.to_string()).collect() };
    let test = CeatTest {
        name: "t".into(),
        x: set("x", &["x1", "x2"]),
        y: set("y", &["y1", "y2"]),
        a: set("a", &["a1", "a2"]),
        b: set("b", &["b1", "b2"]),
    };
    let mut contexts = HashMap::new();
    let mut state = 17u64;
    for w in test.words() {
        let vs: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                (0..4)
                    .map(|_| {
                        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
                    })
                    .collect()
            })
            .collect();
        contexts.insert(w.to_string(), vs);
    }
    let a = ceat_ces(&test, &contexts, 200, 3).unwrap();
    let b = ceat_ces(&test, &contexts, 200, 3).unwrap();
    assert_eq!(a.ces.to_bits(), b.ces.to_bits());
    let lo = a.samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = a.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(lo <= a.ces && a.ces <= hi);
}
