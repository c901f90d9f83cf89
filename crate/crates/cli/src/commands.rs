use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use era_core::counterfactual::{augment_corpus, Domain, Rewriter};
use era_core::distill::{build_examples, train_student_from};
use era_core::lexicon::{GroupLexicon, SwapLexicon};
use era_core::metrics::ceat::{ceat_ces, CeatTest};
use era_core::metrics::embeddings::EmbeddingTable;
use era_core::metrics::generation::{generation_run, MeanStd};
use era_core::metrics::polarity::{polarity_with, GenderDirection, Polarity};
use era_core::metrics::regard::counts_from_csv;
use era_core::metrics::tprd::tprd_from_csv;
use era_core::metrics::{aggregate_equitability, regard_ratios, repeated_equitability};
use era_core::model::checkpoint::{save_model, Checkpoint};
use era_core::model::{
    corpus_perplexity, fluency, generate, train_teacher, ModelShape, ReferenceLM, Tokenizer,
};
use serde_json::{json, Value};

use crate::config::{config_hash, documented_defaults, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::io;
use crate::report::{comparison, emit, load_reports, write_comparison};

/// A fully resolved invocation.
#[derive(Debug)]
pub enum Command {
    Augment,
    TrainTeacher,
    Distill { context_order: Option<usize>, dim: Option<usize> },
    Generate { prompt: Option<String> },
    EvalPolarity { texts: PathBuf },
    EvalEquitability,
    EvalCeat { test: String, contexts: PathBuf },
    EvalTprd { predictions: PathBuf },
    EvalRegard { labels: PathBuf },
    EvalPpl,
    EvalFluency { texts: Option<PathBuf> },
    Report { dirs: Vec<PathBuf> },
    Config { explain: bool },
}

pub fn execute(cfg: &PipelineConfig, command: Command) -> CliResult<()> {
    let started = Instant::now();
    match command {
        Command::Augment => augment(cfg, started),
        Command::TrainTeacher => train(cfg, started),
        Command::Distill { context_order, dim } => distill(cfg, context_order, dim, started),
        Command::Generate { prompt } => generate_cmd(cfg, prompt, started),
        Command::EvalPolarity { texts } => eval_polarity(cfg, &texts, started),
        Command::EvalEquitability => eval_equitability(cfg, started),
        Command::EvalCeat { test, contexts } => eval_ceat(cfg, &test, &contexts, started),
        Command::EvalTprd { predictions } => eval_tprd(cfg, &predictions, started),
        Command::EvalRegard { labels } => eval_regard(cfg, &labels, started),
        Command::EvalPpl => eval_ppl(cfg, started),
        Command::EvalFluency { texts } => eval_fluency(cfg, texts.as_deref(), started),
        Command::Report { dirs } => report_cmd(cfg, &dirs),
        Command::Config { explain } => config_cmd(cfg, explain),
    }
}

/// Run identity; where the outputs go is not part of it.
fn hash(stage: &str, cfg: &PipelineConfig, extra: Value) -> String {
    let mut cfg = cfg.clone();
    cfg.paths.out_dir = None;
    config_hash(&json!({ "stage": stage, "config": cfg, "args": extra }))
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Loaded lexicon for the configured domain.
enum Lexicon {
    Gender(SwapLexicon),
    Race(GroupLexicon),
}

impl Lexicon {
    fn load(cfg: &PipelineConfig) -> CliResult<Self> {
        match cfg.domain {
            Domain::Gender => Ok(Lexicon::Gender(match &cfg.paths.gender_lexicon {
                Some(p) => {
                    io::check_exists("--gender-lexicon", p)?;
                    SwapLexicon::load(p).map_err(|e| CliError::config(format!("--gender-lexicon: {e}")))?
                }
                None => SwapLexicon::builtin(),
            })),
            Domain::Race => Ok(Lexicon::Race(match &cfg.paths.race_lexicon {
                Some(p) => {
                    io::check_exists("--race-lexicon", p)?;
                    GroupLexicon::load(p).map_err(|e| CliError::config(format!("--race-lexicon: {e}")))?
                }
                None => GroupLexicon::builtin(),
            })),
        }
    }

    fn rewriter(&self, seed: u64) -> Rewriter<'_> {
        match self {
            Lexicon::Gender(l) => Rewriter::Gender(l),
            Lexicon::Race(l) => Rewriter::Race { lexicon: l, seed },
        }
    }
}

fn load_checkpoint(flag: &str, path: Option<&PathBuf>) -> CliResult<(ReferenceLM, Tokenizer, BTreeMap<String, String>)> {
    let path = io::require(flag, path)?;
    let ckpt = Checkpoint::load(&path).map_err(|e| match e {
        era_core::model::ModelError::Io { path, source } => CliError::Io { path, source },
        other => CliError::config(format!("{flag}: {other}")),
    })?;
    let metadata = ckpt.metadata.clone();
    let (model, tok) = ckpt
        .into_parts()
        .map_err(|e| CliError::config(format!("{flag}: {e}")))?;
    Ok((model, tok, metadata))
}

/// Report labels describing a model, taken from its checkpoint metadata.
fn model_labels(meta: &BTreeMap<String, String>) -> BTreeMap<String, String> {
    ["model", "method", "mod_fn", "augment"]
        .iter()
        .filter_map(|k| meta.get(*k).map(|v| (k.to_string(), v.clone())))
        .collect()
}

fn augment(cfg: &PipelineConfig, started: Instant) -> CliResult<()> {
    let corpus = io::require("--corpus", cfg.paths.corpus.as_ref())?;
    let lexicon = Lexicon::load(cfg)?;
    let out_dir = cfg.out_dir();
    io::ensure_dir(&out_dir)?;
    let out_path = out_dir.join("augmented.jsonl");
    let rewriter = lexicon.rewriter(cfg.seed);
    let stats = augment_corpus(io::open(&corpus)?, io::create(&out_path)?, &rewriter, cfg.augment_mode)
        .map_err(|e| CliError::io(&out_path, e))?;
    log::info!(
        "augment: {} inputs, {} with counterfactual, {} outputs, {} malformed",
        stats.inputs,
        stats.with_counterfactual,
        stats.outputs,
        stats.malformed
    );
    let metrics = json!({
        "domain": cfg.domain,
        "mode": cfg.augment_mode,
        "inputs": stats.inputs,
        "with_counterfactual": stats.with_counterfactual,
        "malformed": stats.malformed,
        "outputs": stats.outputs,
        "coverage": stats.coverage(),
    });
    let h = hash("augment", cfg, json!({ "corpus": file_name(&corpus) }));
    emit(&out_dir, "augment", h, BTreeMap::new(), metrics, started)?;
    Ok(())
}

fn train(cfg: &PipelineConfig, started: Instant) -> CliResult<()> {
    let corpus = io::require("--corpus", cfg.paths.corpus.as_ref())?;
    let texts = io::read_texts(&corpus)?;
    let tok = Tokenizer::build(&texts, cfg.model.vocab_size, cfg.model.tokenizer)?;
    let seqs: Vec<Vec<u32>> = texts.iter().map(|t| tok.tokenize(t)).collect();
    let shape = ModelShape {
        context_order: cfg.model.context_order,
        dim: cfg.model.dim,
    };
    let (model, logs) = train_teacher(&seqs, tok.vocab_size(), shape, &cfg.teacher)?;
    let h = hash("train-teacher", cfg, json!({ "corpus": file_name(&corpus) }));
    let labels: BTreeMap<String, String> = [
        ("model", h.clone()),
        ("method", "teacher".to_string()),
        ("mod_fn", "n/a".to_string()),
        ("augment", "n/a".to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let out_dir = cfg.out_dir();
    io::ensure_dir(&out_dir)?;
    save_model(&out_dir.join("teacher.json"), &model, &tok, labels.clone())?;
    io::write_epochs(&out_dir.join("teacher_epochs.csv"), &logs)?;
    let last = logs.last();
    let metrics = json!({
        "vocab_size": tok.vocab_size(),
        "sequences": seqs.len(),
        "epochs": logs.len(),
        "final_ce": last.map(|l| l.ce),
    });
    emit(&out_dir, "train-teacher", h, labels, metrics, started)?;
    Ok(())
}

fn distill(
    cfg: &PipelineConfig,
    context_order: Option<usize>,
    dim: Option<usize>,
    started: Instant,
) -> CliResult<()> {
    let (teacher, tok, _) = load_checkpoint("--teacher", cfg.paths.teacher.as_ref())?;
    let corpus = io::require("--corpus", cfg.paths.corpus.as_ref())?;
    let lexicon = Lexicon::load(cfg)?;
    let texts = io::read_texts(&corpus)?;
    let d = &cfg.distill;
    let rewriter = lexicon.rewriter(cfg.seed);
    let (examples, build) = build_examples(&teacher, &tok, &texts, Some(&rewriter), d)?;
    let shape = ModelShape {
        context_order: context_order.unwrap_or(teacher.context_order()),
        dim: dim.unwrap_or(teacher.shape().dim),
    };
    let student = ReferenceLM::random(shape, tok.vocab_size(), d.init_scale, d.seed);
    let (student, logs) = train_student_from(student, &examples, d)?;
    if !student.is_finite() {
        return Err(CliError::Numerical("student parameters are not finite".into()));
    }
    let h = hash(
        "distill",
        cfg,
        json!({ "corpus": file_name(&corpus), "context_order": shape.context_order, "dim": shape.dim }),
    );
    let method = if d.mod_fn == era_core::distill::ModFn::None && !d.augment {
        "baseline"
    } else {
        "era"
    };
    let labels: BTreeMap<String, String> = [
        ("model", h.clone()),
        ("method", method.to_string()),
        ("mod_fn", d.mod_fn.to_string()),
        ("augment", d.augment.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let out_dir = cfg.out_dir();
    io::ensure_dir(&out_dir)?;
    save_model(&out_dir.join("student.json"), &student, &tok, labels.clone())?;
    io::write_epochs(&out_dir.join("epochs.csv"), &logs)?;
    let last = logs.last();
    let metrics = json!({
        "texts": build.texts,
        "with_counterfactual": build.with_counterfactual,
        "sequences": build.sequences,
        "epochs": logs.len(),
        "final_ce": last.map(|l| l.ce),
        "final_kl": last.map(|l| l.kl),
        "final_total": last.map(|l| l.total),
    });
    emit(&out_dir, "distill", h, labels, metrics, started)?;
    Ok(())
}

fn generate_cmd(cfg: &PipelineConfig, prompt: Option<String>, started: Instant) -> CliResult<()> {
    let (model, tok, meta) = load_checkpoint("--model", cfg.paths.model.as_ref())?;
    let prompts = match (&prompt, &cfg.paths.prompts) {
        (Some(p), _) => vec![era_core::metrics::Prompt { group: String::new(), prompt: p.clone() }],
        (None, path) => io::read_prompts(&io::require("--prompts", path.as_ref())?)?,
    };
    let mut rows = Vec::with_capacity(prompts.len());
    for (i, p) in prompts.iter().enumerate() {
        let sampler = era_core::model::SamplerConfig {
            seed: era_core::counterfactual::record_seed(cfg.sampler.seed, i as u64),
            ..cfg.sampler
        };
        let g = generate(&model, &tok, &p.prompt, &sampler)?;
        rows.push(json!({
            "group": p.group,
            "prompt": p.prompt,
            "continuation": g.continuation,
            "stopped_on_eos": g.stopped_on_eos,
        }));
    }
    let out_dir = cfg.out_dir();
    io::ensure_dir(&out_dir)?;
    io::write_jsonl(&out_dir.join("generations.jsonl"), &rows)?;
    let h = hash("generate", cfg, json!({ "prompt": prompt }));
    let metrics = json!({ "generations": rows.len() });
    emit(&out_dir, "generate", h, model_labels(&meta), metrics, started)?;
    Ok(())
}

fn load_embeddings(cfg: &PipelineConfig) -> CliResult<EmbeddingTable> {
    let path = io::require("--embeddings", cfg.paths.embeddings.as_ref())?;
    let emb = EmbeddingTable::load(&path).map_err(|e| match e {
        era_core::metrics::MetricsError::Io { path, source } => CliError::Io { path, source },
        other => CliError::config(format!("--embeddings: {other}")),
    })?;
    for w in ["she", "he"] {
        if emb.get(w).is_none() {
            return Err(CliError::config(format!("--embeddings: no vector for {w:?}")));
        }
    }
    Ok(emb)
}

fn eval_polarity(cfg: &PipelineConfig, texts: &Path, started: Instant) -> CliResult<()> {
    io::check_exists("--texts", texts)?;
    let emb = load_embeddings(cfg)?;
    let groups = io::read_grouped_texts(texts)?;
    let direction = GenderDirection::new(&emb)?;
    let mut counts = BTreeMap::new();
    let mut verdicts = Vec::new();
    for (group, items) in &groups {
        let entry: &mut (usize, usize) = counts.entry(group.clone()).or_default();
        for text in items {
            let v = polarity_with(text, &emb, &direction);
            let label = Polarity::classify(v.score, cfg.eval.threshold);
            match label {
                Polarity::MalePolar => entry.0 += 1,
                Polarity::FemalePolar => entry.1 += 1,
                Polarity::Neutral => {}
            }
            verdicts.push(json!({ "group": group, "text": text, "score": v.score, "label": label }));
        }
    }
    let report = aggregate_equitability(&counts)?;
    let metrics = json!({ "threshold": cfg.eval.threshold, "equitability": report, "texts": verdicts });
    let h = hash("eval-polarity", cfg, json!({ "texts": file_name(texts) }));
    emit(&cfg.out_dir(), "eval-polarity", h, BTreeMap::new(), metrics, started)?;
    Ok(())
}

fn eval_equitability(cfg: &PipelineConfig, started: Instant) -> CliResult<()> {
    let (model, tok, meta) = load_checkpoint("--model", cfg.paths.model.as_ref())?;
    let prompts = io::read_prompts(&io::require("--prompts", cfg.paths.prompts.as_ref())?)?;
    let emb = load_embeddings(cfg)?;
    let rep = repeated_equitability(&model, &tok, &prompts, &emb, &cfg.sampler, cfg.eval.threshold, cfg.eval.runs)?;
    let runs: Vec<Value> = rep
        .runs
        .iter()
        .map(|r| json!({ "run": r.run, "average": r.equitability.average, "minimum": r.equitability.minimum, "per_group": r.equitability.per_group }))
        .collect();
    let metrics = json!({
        "threshold": cfg.eval.threshold,
        "runs": cfg.eval.runs,
        "equitability": { "average": rep.average, "minimum": rep.minimum, "runs": runs },
    });
    let h = hash("eval-equitability", cfg, json!({ "model": meta.get("model") }));
    emit(&cfg.out_dir(), "eval-equitability", h, model_labels(&meta), metrics, started)?;
    Ok(())
}

fn eval_ceat(cfg: &PipelineConfig, test: &str, contexts: &Path, started: Instant) -> CliResult<()> {
    let spec = match CeatTest::builtin(test) {
        Some(t) => t,
        None => {
            let path = Path::new(test);
            io::check_exists("--test", path)?;
            CeatTest::load(path)?
        }
    };
    io::check_exists("--contexts", contexts)?;
    let text = std::fs::read_to_string(contexts).map_err(|e| CliError::io(contexts, e))?;
    let vectors: HashMap<String, Vec<Vec<f64>>> = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("--contexts {}: {e}", contexts.display())))?;
    let n = cfg.eval.ceat_samples;
    let report = ceat_ces(&spec, &vectors, n, cfg.seed)?;
    let es = MeanStd::of(&report.samples).expect("n > 0");
    let metrics = json!({
        "test": spec.name,
        "samples": n,
        "ces": report.ces,
        "tau2": report.tau2,
        "effect_size_mean": es.mean,
        "effect_size_std": es.std,
    });
    let h = hash("eval-ceat", cfg, json!({ "test": test, "contexts": file_name(contexts) }));
    emit(&cfg.out_dir(), "eval-ceat", h, BTreeMap::new(), metrics, started)?;
    Ok(())
}

fn eval_tprd(cfg: &PipelineConfig, predictions: &Path, started: Instant) -> CliResult<()> {
    io::check_exists("--predictions", predictions)?;
    let report = tprd_from_csv(io::open(predictions)?)?;
    let h = hash("eval-tprd", cfg, json!({ "predictions": file_name(predictions) }));
    emit(&cfg.out_dir(), "eval-tprd", h, BTreeMap::new(), serde_json::to_value(&report).expect("serializable"), started)?;
    Ok(())
}

fn eval_regard(cfg: &PipelineConfig, labels: &Path, started: Instant) -> CliResult<()> {
    io::check_exists("--labels", labels)?;
    let counts = counts_from_csv(io::open(labels)?)?;
    let report = regard_ratios(&counts)?;
    let h = hash("eval-regard", cfg, json!({ "labels": file_name(labels) }));
    emit(&cfg.out_dir(), "eval-regard", h, BTreeMap::new(), serde_json::to_value(&report).expect("serializable"), started)?;
    Ok(())
}

fn eval_ppl(cfg: &PipelineConfig, started: Instant) -> CliResult<()> {
    let (model, tok, meta) = load_checkpoint("--model", cfg.paths.model.as_ref())?;
    let corpus = io::require("--corpus", cfg.paths.corpus.as_ref())?;
    let seqs: Vec<Vec<u32>> = io::read_texts(&corpus)?.iter().map(|t| tok.tokenize(t)).collect();
    let ppl = corpus_perplexity(&model, &seqs, cfg.eval.chunk, cfg.eval.stride)?;
    if !ppl.is_finite() {
        return Err(CliError::Numerical(format!("perplexity is {ppl}")));
    }
    let metrics = json!({
        "perplexity": ppl,
        "tokens": seqs.iter().map(Vec::len).sum::<usize>(),
        "chunk": cfg.eval.chunk,
        "stride": cfg.eval.stride,
    });
    let h = hash("eval-ppl", cfg, json!({ "model": meta.get("model"), "corpus": file_name(&corpus) }));
    emit(&cfg.out_dir(), "eval-ppl", h, model_labels(&meta), metrics, started)?;
    Ok(())
}

fn eval_fluency(cfg: &PipelineConfig, texts: Option<&Path>, started: Instant) -> CliResult<()> {
    let (scorer, scorer_tok, _) = load_checkpoint("--scorer", cfg.paths.scorer.as_ref())?;
    let chunk = cfg.eval.chunk;
    let (values, labels, extra) = match texts {
        Some(path) => {
            io::check_exists("--texts", path)?;
            let groups = io::read_grouped_texts(path)?;
            let r = fluency(&scorer, &scorer_tok, &groups, chunk)?;
            (vec![r.macro_average], BTreeMap::new(), json!({ "texts": file_name(path) }))
        }
        None => {
            let (model, tok, meta) = load_checkpoint("--model", cfg.paths.model.as_ref())?;
            let prompts = io::read_prompts(&io::require("--prompts", cfg.paths.prompts.as_ref())?)?;
            // Generation only; polarity is not needed, so any gender pair works.
            let emb = EmbeddingTable::from_entries([("she", vec![1.0]), ("he", vec![-1.0])])?;
            let mut values = Vec::with_capacity(cfg.eval.runs);
            for run in 0..cfg.eval.runs {
                let g = generation_run(&model, &tok, &prompts, &emb, &cfg.sampler, cfg.eval.threshold, run)?;
                let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
                for s in g.generations {
                    groups.entry(s.group).or_default().push(format!("{}{}", s.prompt, s.continuation));
                }
                values.push(fluency(&scorer, &scorer_tok, &groups, chunk)?.macro_average);
            }
            (values, model_labels(&meta), json!({ "model": meta.get("model") }))
        }
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Numerical("fluency is not finite".into()));
    }
    let summary = MeanStd::of(&values).expect("at least one run");
    let metrics = json!({ "fluency": summary, "per_run": values, "chunk": chunk });
    let h = hash("eval-fluency", cfg, extra);
    emit(&cfg.out_dir(), "eval-fluency", h, labels, metrics, started)?;
    Ok(())
}

fn report_cmd(cfg: &PipelineConfig, dirs: &[PathBuf]) -> CliResult<()> {
    for d in dirs {
        io::check_exists("report directory", d)?;
    }
    let reports = load_reports(dirs)?;
    let rows = comparison(&reports);
    write_comparison(&cfg.out_dir(), &rows)?;
    log::info!("report: {} rows from {} reports", rows.len(), reports.len());
    Ok(())
}

fn config_cmd(cfg: &PipelineConfig, explain: bool) -> CliResult<()> {
    if explain {
        for d in documented_defaults() {
            println!("{:<26} {:<10} {}", d.key, d.value, d.source);
        }
        return Ok(());
    }
    let json = serde_json::to_string_pretty(cfg).expect("config serializes");
    println!("{json}");
    log::info!("config hash {}", config_hash(cfg));
    Ok(())
}
