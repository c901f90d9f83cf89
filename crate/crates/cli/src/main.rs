//! `era`: counterfactual augmentation, fair distillation and evaluation
//! pipelines over the reference language model.
//!
//! Exit codes: 0 success, 1 I/O, 2 configuration or validation, 3 numerical
//! failure. `ERA_LOG` sets the log filter (default `info`).

mod commands;
mod config;
mod error;
mod io;
mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use era_core::counterfactual::{AugmentMode, Domain};
use era_core::distill::ModFn;
use era_core::model::TokenizerMode;

use crate::config::PipelineConfig;
use crate::error::CliResult;

#[derive(Parser, Debug)]
#[command(name = "era", version, about = "Fair knowledge distillation pipelines")]
struct Cli {
    /// JSON pipeline config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory receiving all outputs.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rewrite a JSONL corpus with counterfactual role reversal.
    Augment(AugmentArgs),
    /// Train a teacher language model on a corpus.
    TrainTeacher(TrainArgs),
    /// Distill a student from a teacher checkpoint.
    Distill(DistillArgs),
    /// Sample continuations for prompts.
    Generate(GenerateArgs),
    /// Compute a metric.
    Eval(EvalArgs),
    /// Merge run reports into a comparison table.
    Report(ReportArgs),
    /// Print the resolved configuration.
    Config(ConfigArgs),
}

#[derive(Args, Debug, Default)]
struct LexiconArgs {
    #[arg(long)]
    domain: Option<Domain>,
    /// Gender pair file (TSV); the shipped list when omitted.
    #[arg(long)]
    gender_lexicon: Option<PathBuf>,
    /// Race word groups (JSON); the shipped groups when omitted.
    #[arg(long)]
    race_lexicon: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    /// Input JSONL with `id` and `text` fields.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    mode: Option<AugmentMode>,
    #[command(flatten)]
    lexicon: LexiconArgs,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long)]
    context_order: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    tokenizer: Option<TokenizerMode>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
}

#[derive(Args, Debug)]
struct DistillArgs {
    #[arg(long)]
    teacher: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// none, max, mean, expmean, swap or blend:<lambda>.
    #[arg(long)]
    mod_fn: Option<ModFn>,
    #[arg(long, overrides_with = "no_augment")]
    augment: bool,
    #[arg(long)]
    no_augment: bool,
    #[arg(long, overrides_with = "modify_orig_only")]
    modify_both: bool,
    #[arg(long)]
    modify_orig_only: bool,
    #[arg(long)]
    temperature: Option<f64>,
    /// Cross-entropy weight; the KL weight becomes `1 - W` unless given.
    #[arg(long)]
    alpha_ce: Option<f64>,
    #[arg(long)]
    alpha_kl: Option<f64>,
    /// Multiply the KL term by T^2 (default) or leave it unscaled.
    #[arg(long, overrides_with = "no_kl_t2")]
    kl_t2: bool,
    #[arg(long)]
    no_kl_t2: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    /// Student shape; the teacher's when omitted.
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    lexicon: LexiconArgs,
}

#[derive(Args, Debug, Default)]
struct SamplerArgs {
    #[arg(long)]
    top_p: Option<f64>,
    #[arg(long)]
    max_length: Option<usize>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// JSONL prompts with `group` and `prompt` fields.
    #[arg(long, conflicts_with = "prompt")]
    prompts: Option<PathBuf>,
    #[arg(long)]
    prompt: Option<String>,
    #[command(flatten)]
    sampler: SamplerArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(subcommand)]
    metric: Metric,
}

#[derive(Subcommand, Debug)]
enum Metric {
    /// Gender polarity of given texts, with per-group equitability.
    Polarity {
        /// JSONL with `group` and `text` fields.
        #[arg(long)]
        texts: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Equitability of generated continuations over repeated runs.
    Equitability {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        prompts: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        runs: Option<usize>,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Combined effect size of an embedding association test.
    Ceat {
        /// Test file, or one of the shipped `ceat6`, `ceat7`, `ceat8`.
        #[arg(long, default_value = "ceat6")]
        test: String,
        /// JSON object mapping each word to its contextual vectors.
        #[arg(long)]
        contexts: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// True-positive-rate difference from classifier predictions (CSV).
    Tprd {
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Regard-ratio variance from labelled generations (CSV).
    Regard {
        #[arg(long)]
        labels: PathBuf,
    },
    /// Perplexity of a model on a corpus.
    Ppl {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        chunk: Option<usize>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Perplexity of text under a scorer model, macro-averaged over groups.
    Fluency {
        #[arg(long)]
        scorer: Option<PathBuf>,
        /// Score these texts (JSONL `group`, `text`) instead of generating.
        #[arg(long, conflicts_with_all = ["model", "prompts"])]
        texts: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        prompts: Option<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        chunk: Option<usize>,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Directories holding `*.report.json` files.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// List each reference default with its provenance.
    #[arg(long)]
    explain: bool,
}

fn flag(on: bool, off: bool) -> Option<bool> {
    match (on, off) {
        (true, _) => Some(true),
        (_, true) => Some(false),
        _ => None,
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn base_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    if cli.out_dir.is_some() {
        cfg.paths.out_dir = cli.out_dir.clone();
    }
    Ok(cfg)
}

fn apply_lexicon(cfg: &mut PipelineConfig, a: &LexiconArgs) {
    set(&mut cfg.domain, a.domain);
    if a.gender_lexicon.is_some() {
        cfg.paths.gender_lexicon = a.gender_lexicon.clone();
    }
    if a.race_lexicon.is_some() {
        cfg.paths.race_lexicon = a.race_lexicon.clone();
    }
}

fn apply_sampler(cfg: &mut PipelineConfig, a: &SamplerArgs) {
    set(&mut cfg.sampler.top_p, a.top_p);
    set(&mut cfg.sampler.max_length, a.max_length);
}

fn some_path(slot: &mut Option<PathBuf>, value: &Option<PathBuf>) {
    if value.is_some() {
        *slot = value.clone();
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = base_config(&cli)?;
    let command = match cli.command {
        Command::Augment(a) => {
            some_path(&mut cfg.paths.corpus, &a.corpus);
            set(&mut cfg.augment_mode, a.mode);
            apply_lexicon(&mut cfg, &a.lexicon);
            commands::Command::Augment
        }
        Command::TrainTeacher(a) => {
            some_path(&mut cfg.paths.corpus, &a.corpus);
            set(&mut cfg.model.vocab_size, a.vocab_size);
            set(&mut cfg.model.tokenizer, a.tokenizer);
            set(&mut cfg.model.context_order, a.model.context_order);
            set(&mut cfg.model.dim, a.model.dim);
            set(&mut cfg.teacher.epochs, a.epochs);
            set(&mut cfg.teacher.lr, a.lr);
            set(&mut cfg.teacher.batch, a.batch);
            commands::Command::TrainTeacher
        }
        Command::Distill(a) => {
            some_path(&mut cfg.paths.teacher, &a.teacher);
            some_path(&mut cfg.paths.corpus, &a.corpus);
            apply_lexicon(&mut cfg, &a.lexicon);
            let d = &mut cfg.distill;
            set(&mut d.mod_fn, a.mod_fn);
            set(&mut d.augment, flag(a.augment, a.no_augment));
            set(&mut d.modify_both, flag(a.modify_both, a.modify_orig_only));
            set(&mut d.scale_kl_by_t2, flag(a.kl_t2, a.no_kl_t2));
            set(&mut d.temperature, a.temperature);
            if let Some(w) = a.alpha_ce {
                d.alpha_ce = w;
                d.alpha_kl = 1.0 - w;
            }
            set(&mut d.alpha_kl, a.alpha_kl);
            set(&mut d.epochs, a.epochs);
            set(&mut d.lr, a.lr);
            set(&mut d.batch, a.batch);
            commands::Command::Distill {
                context_order: a.model.context_order,
                dim: a.model.dim,
            }
        }
        Command::Generate(a) => {
            some_path(&mut cfg.paths.model, &a.model);
            some_path(&mut cfg.paths.prompts, &a.prompts);
            apply_sampler(&mut cfg, &a.sampler);
            commands::Command::Generate { prompt: a.prompt }
        }
        Command::Eval(e) => match e.metric {
            Metric::Polarity { texts, embeddings, threshold } => {
                some_path(&mut cfg.paths.embeddings, &embeddings);
                set(&mut cfg.eval.threshold, threshold);
                commands::Command::EvalPolarity { texts }
            }
            Metric::Equitability { model, prompts, embeddings, threshold, runs, sampler } => {
                some_path(&mut cfg.paths.model, &model);
                some_path(&mut cfg.paths.prompts, &prompts);
                some_path(&mut cfg.paths.embeddings, &embeddings);
                set(&mut cfg.eval.threshold, threshold);
                set(&mut cfg.eval.runs, runs);
                apply_sampler(&mut cfg, &sampler);
                commands::Command::EvalEquitability
            }
            Metric::Ceat { test, contexts, samples } => {
                set(&mut cfg.eval.ceat_samples, samples);
                commands::Command::EvalCeat { test, contexts }
            }
            Metric::Tprd { predictions } => commands::Command::EvalTprd { predictions },
            Metric::Regard { labels } => commands::Command::EvalRegard { labels },
            Metric::Ppl { model, corpus, chunk, stride } => {
                some_path(&mut cfg.paths.model, &model);
                some_path(&mut cfg.paths.corpus, &corpus);
                set(&mut cfg.eval.chunk, chunk);
                set(&mut cfg.eval.stride, stride);
                commands::Command::EvalPpl
            }
            Metric::Fluency { scorer, texts, model, prompts, runs, chunk, sampler } => {
                some_path(&mut cfg.paths.scorer, &scorer);
                some_path(&mut cfg.paths.model, &model);
                some_path(&mut cfg.paths.prompts, &prompts);
                set(&mut cfg.eval.runs, runs);
                set(&mut cfg.eval.chunk, chunk);
                if chunk.is_some() {
                    cfg.eval.stride = cfg.eval.stride.min(cfg.eval.chunk);
                }
                apply_sampler(&mut cfg, &sampler);
                commands::Command::EvalFluency { texts }
            }
        },
        Command::Report(a) => commands::Command::Report { dirs: a.dirs },
        Command::Config(a) => commands::Command::Config { explain: a.explain },
    };
    cfg.propagate_seed();
    cfg.validate()?;
    commands::execute(&cfg, command)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ERA_LOG", "info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
