//! Batch command-line interface for ranking-based QA evaluation.
//!
//! One binary, eleven subcommands covering both task families: retrieval
//! evaluation with no-answer semantics, ranked partial-match span scoring,
//! span decoding from logits, overlap suppression, zero-answer threshold
//! tuning, voting ensembles, leakage analysis, leakage-aware splitting,
//! lexical baselines, and dataset validation.
//!
//! Exit codes: 0 on success, 1 on contract/integrity/parse errors, 2 on
//! usage errors. Every invocation is deterministic — identical inputs give
//! byte-identical outputs, regardless of `--threads`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

pub mod commands;
pub mod config;
pub mod report;

use config::FileConfig;
use report::OutputFormat;

/// Errors split by exit code: usage problems (2) versus data/contract
/// problems (1).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(rankqa_core::Error),
}

impl From<rankqa_core::Error> for CliError {
    fn from(e: rankqa_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Ranking-based question-answering evaluation toolkit.
#[derive(Debug, Parser)]
#[command(
    name = "rankqa",
    version,
    about = "Batch evaluation for ranking-based question answering",
    propagate_version = true
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON config file supplying defaults for tuning knobs; flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Report format (default: text).
    #[arg(long, global = true, value_enum, value_name = "FMT")]
    pub format: Option<OutputFormat>,
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 or absent = automatic.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
}

/// Which task family a command operates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskKind {
    /// Passage retrieval (runs + qrels).
    A,
    /// Ranked reading comprehension (span lists + dataset).
    B,
}

/// How `threshold-tune` picks ζ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TuneMode {
    /// Exhaustive scan over every achievable marked-set; keeps the best.
    Search,
    /// Mark a fixed fraction of items (default 0.15).
    Quantile,
    /// Use a fixed ζ on the normalized scale (default 0.8).
    Fixed,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a retrieval run against judgments (MAP, MRR, recall@k).
    EvalRetrieval(EvalRetrievalArgs),
    /// Score ranked span predictions against a dataset (partial-match AP).
    EvalMrc(EvalMrcArgs),
    /// Decode ranked answer spans from start/end token logits.
    SpanDecode(SpanDecodeArgs),
    /// Suppress near-duplicate spans (greedy overlap suppression).
    Postprocess(PostprocessArgs),
    /// Pick a zero-answer threshold ζ and report the resulting metric.
    ThresholdTune(ThresholdTuneArgs),
    /// Combine member systems by summing their scores per candidate.
    Ensemble(EnsembleArgs),
    /// Categorize samples by repeated passage/question/answer structure.
    AnalyzeLeakage(AnalyzeLeakageArgs),
    /// Re-split a dataset so hard out-of-distribution samples land in dev.
    SplitFaithful(SplitFaithfulArgs),
    /// Rank passages for each question with Okapi BM25.
    Bm25Search(Bm25SearchArgs),
    /// Rank passages for each question by tf·idf cosine similarity.
    TfidfSearch(TfidfSearchArgs),
    /// Check dataset files and summarize their statistics.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct EvalRetrievalArgs {
    /// Ranked run file (TSV).
    #[arg(long, value_name = "FILE")]
    pub run: PathBuf,
    /// Relevance judgments (TSV).
    #[arg(long, value_name = "FILE")]
    pub qrels: PathBuf,
    /// Recall cutoff; repeat for several (default: 10 and 100).
    #[arg(long = "recall-k", value_name = "K")]
    pub recall_k: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct EvalMrcArgs {
    /// Predicted span lists (JSON).
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,
    /// Gold dataset (JSON).
    #[arg(long, value_name = "FILE")]
    pub gold: PathBuf,
    /// Mark samples whose normalized no-answer score exceeds ζ before
    /// scoring; requires predictions that carry the no-answer channel.
    #[arg(long, value_name = "ZETA")]
    pub zeta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SpanDecodeArgs {
    /// Start/end token logits, one JSON object per line.
    #[arg(long, value_name = "FILE")]
    pub logits: PathBuf,
    /// Gold dataset (JSON); supplies each sample's passage text.
    #[arg(long, value_name = "FILE")]
    pub gold: PathBuf,
    /// Longest decodable span in tokens (default 30).
    #[arg(long, value_name = "N")]
    pub max_span_len: Option<usize>,
    /// Candidates kept per sample before suppression (default 20).
    #[arg(long, value_name = "N")]
    pub n_best: Option<usize>,
    /// Where to write the decoded span lists (JSON).
    #[arg(long, value_name = "FILE")]
    pub spans_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PostprocessArgs {
    /// Span lists to filter (JSON).
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,
    /// Gold dataset (JSON); supplies each sample's passage text.
    #[arg(long, value_name = "FILE")]
    pub gold: PathBuf,
    /// Suppress a span when its token-F1 overlap with a kept span exceeds
    /// this (default 0.5).
    #[arg(long, value_name = "F1")]
    pub overlap_threshold: Option<f64>,
    /// Drop spans shorter than this many tokens (default 1).
    #[arg(long, value_name = "N")]
    pub min_token_len: Option<usize>,
    /// Keep at most this many spans per sample (default 10).
    #[arg(long, value_name = "N")]
    pub max_answers: Option<usize>,
    /// Where to write the filtered span lists (JSON).
    #[arg(long, value_name = "FILE")]
    pub spans_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ThresholdTuneArgs {
    /// Task family: a (retrieval run) or b (span lists).
    #[arg(long, value_enum)]
    pub task: TaskKind,
    /// How to pick ζ (default: search).
    #[arg(long, value_enum, value_name = "MODE")]
    pub mode: Option<TuneMode>,
    /// Raw ranked run (TSV) — task a.
    #[arg(long, value_name = "FILE", required_if_eq("task", "a"))]
    pub run: Option<PathBuf>,
    /// Relevance judgments (TSV) — task a.
    #[arg(long, value_name = "FILE", required_if_eq("task", "a"))]
    pub qrels: Option<PathBuf>,
    /// Predicted span lists with no-answer scores (JSON) — task b.
    #[arg(long, value_name = "FILE", required_if_eq("task", "b"))]
    pub pred: Option<PathBuf>,
    /// Gold dataset (JSON) — task b.
    #[arg(long, value_name = "FILE", required_if_eq("task", "b"))]
    pub gold: Option<PathBuf>,
    /// Fixed ζ for --mode fixed (default 0.8).
    #[arg(long, value_name = "ZETA")]
    pub zeta: Option<f64>,
    /// Marked fraction for --mode quantile (default 0.15).
    #[arg(long, value_name = "FRAC")]
    pub fraction: Option<f64>,
    /// Write the search trace (one row per candidate ζ) as CSV.
    #[arg(long, value_name = "FILE")]
    pub trace_out: Option<PathBuf>,
    /// Write the thresholded run (TSV) — task a.
    #[arg(long, value_name = "FILE")]
    pub run_out: Option<PathBuf>,
    /// Write the thresholded span lists (JSON) — task b.
    #[arg(long, value_name = "FILE")]
    pub spans_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// Task family: a (runs) or b (span lists).
    #[arg(long, value_enum)]
    pub task: TaskKind,
    /// Member files; repeatable, order-insensitive.
    #[arg(long = "member", value_name = "FILE", required = true)]
    pub members: Vec<PathBuf>,
    /// Tag written into the combined run (default: ensemble).
    #[arg(long, value_name = "TAG")]
    pub tag: Option<String>,
    /// Gold dataset (JSON) — task b.
    #[arg(long, value_name = "FILE", required_if_eq("task", "b"))]
    pub gold: Option<PathBuf>,
    /// Write the combined run (TSV) — task a.
    #[arg(long, value_name = "FILE")]
    pub run_out: Option<PathBuf>,
    /// Write the combined span lists (JSON) — task b.
    #[arg(long, value_name = "FILE")]
    pub spans_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeLeakageArgs {
    /// Dataset to analyze (JSON).
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitFaithfulArgs {
    /// Dataset to re-split (JSON).
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,
    /// Zero-answer share the dev split should reach (default 0.067).
    #[arg(long, value_name = "RATIO")]
    pub zero_ratio: Option<f64>,
    /// Write the train split as a dataset (JSON).
    #[arg(long, value_name = "FILE")]
    pub train_out: Option<PathBuf>,
    /// Write the dev split as a dataset (JSON).
    #[arg(long, value_name = "FILE")]
    pub dev_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Bm25SearchArgs {
    /// Passage collection (TSV).
    #[arg(long, value_name = "FILE")]
    pub collection: PathBuf,
    /// Questions to search for (TSV).
    #[arg(long, value_name = "FILE")]
    pub questions: PathBuf,
    /// Ranked-list depth (default 10, capped at 10).
    #[arg(long, value_name = "K")]
    pub k: Option<usize>,
    /// Term-frequency saturation (default 1.2).
    #[arg(long, value_name = "K1")]
    pub k1: Option<f64>,
    /// Length normalization, in [0, 1] (default 0.75).
    #[arg(long, value_name = "B")]
    pub b: Option<f64>,
    /// Run tag (default: bm25).
    #[arg(long, value_name = "TAG")]
    pub tag: Option<String>,
    /// Write the run (TSV).
    #[arg(long, value_name = "FILE")]
    pub run_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TfidfSearchArgs {
    /// Passage collection (TSV).
    #[arg(long, value_name = "FILE")]
    pub collection: PathBuf,
    /// Questions to search for (TSV).
    #[arg(long, value_name = "FILE")]
    pub questions: PathBuf,
    /// Ranked-list depth (default 10, capped at 10).
    #[arg(long, value_name = "K")]
    pub k: Option<usize>,
    /// Run tag (default: tfidf).
    #[arg(long, value_name = "TAG")]
    pub tag: Option<String>,
    /// Write the run (TSV).
    #[arg(long, value_name = "FILE")]
    pub run_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Questions file (TSV).
    #[arg(long, value_name = "FILE")]
    pub questions: Option<PathBuf>,
    /// Passage collection (TSV).
    #[arg(long, value_name = "FILE")]
    pub collection: Option<PathBuf>,
    /// Relevance judgments (TSV).
    #[arg(long, value_name = "FILE")]
    pub qrels: Option<PathBuf>,
    /// MRC dataset (JSON).
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
}

/// Parse argv, run, and translate errors to exit codes. Usage errors from
/// the argument parser itself exit 2 via clap before this returns.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            2
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Dispatch one parsed invocation and emit its report.
pub fn execute(cli: Cli) -> CliResult<()> {
    let cfg = FileConfig::load(cli.global.config.as_deref())?;
    if let Some(n) = cli.global.threads.or(cfg.threads) {
        // Thread count affects scheduling only, never results; a pool that
        // was already initialized (second in-process call) is left as-is.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let format = cli.global.format.or(cfg.format).unwrap_or(OutputFormat::Text);
    let report = match &cli.command {
        Command::EvalRetrieval(args) => commands::eval_retrieval(args, &cfg)?,
        Command::EvalMrc(args) => commands::eval_mrc(args, &cfg)?,
        Command::SpanDecode(args) => commands::span_decode(args, &cfg)?,
        Command::Postprocess(args) => commands::postprocess(args, &cfg)?,
        Command::ThresholdTune(args) => commands::threshold_tune(args, &cfg)?,
        Command::Ensemble(args) => commands::ensemble(args, &cfg)?,
        Command::AnalyzeLeakage(args) => commands::analyze_leakage_cmd(args)?,
        Command::SplitFaithful(args) => commands::split_faithful_cmd(args, &cfg)?,
        Command::Bm25Search(args) => commands::bm25_search_cmd(args, &cfg)?,
        Command::TfidfSearch(args) => commands::tfidf_search_cmd(args, &cfg)?,
        Command::Validate(args) => commands::validate(args)?,
    };
    report::emit(&report, format, cli.global.out.as_deref())?;
    Ok(())
}
