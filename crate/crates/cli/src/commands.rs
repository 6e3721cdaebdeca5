//! Subcommand implementations: parse inputs, call the library, write any
//! requested artifact files, and return the report to emit.
//!
//! Warning routing: parse-time diagnostics (file oddities) go to stderr so
//! the report stream stays byte-identical to library-level evaluation;
//! evaluation-semantics warnings stay inside the reports that own them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;

use rankqa_core::ensemble::{aggregate_retrieval, aggregate_spans};
use rankqa_core::formats::{
    parse_collection, parse_logits, parse_mrc_dataset, parse_qrels, parse_questions, parse_run,
    parse_span_runs, write_mrc_dataset, write_run, write_span_runs,
};
use rankqa_core::leakage::{analyze_leakage, faithful_split, Split};
use rankqa_core::lexical::{lexical_run, Bm25Params, InvertedIndex, LexicalScorer};
use rankqa_core::metrics::mrc::evaluate_span_runs;
use rankqa_core::metrics::retrieval::evaluate_run;
use rankqa_core::model::{validate_dataset, MrcSample, SpanRankedList};
use rankqa_core::postprocess::{postprocess_list, NmsConfig};
use rankqa_core::render;
use rankqa_core::span::{decode_spans, loss_report, no_answer_score};
use rankqa_core::threshold::{
    apply_to_run, apply_to_span_lists, find_best_zeta, gamma_retrieval, gamma_spans, normalize,
    quantile_zeta, sigma, ThresholdSearch,
};
use rankqa_core::{AnswerSpan, Error, ScoredSpan};

use crate::config::FileConfig;
use crate::report::{
    schema_version, EnsembleReport, PostprocessReport, Report, SearchReport, TuneReport,
};
use crate::{
    usage, AnalyzeLeakageArgs, Bm25SearchArgs, CliResult, EnsembleArgs, EvalMrcArgs,
    EvalRetrievalArgs, PostprocessArgs, SpanDecodeArgs, SplitFaithfulArgs, TaskKind,
    TfidfSearchArgs, ThresholdTuneArgs, TuneMode, ValidateArgs,
};

/// Print parse-time diagnostics to stderr, keeping the report stream clean.
fn report_parse_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn write_text_file(path: &Path, body: &str) -> rankqa_core::Result<()> {
    std::fs::write(path, body).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn eval_retrieval(args: &EvalRetrievalArgs, cfg: &FileConfig) -> CliResult<Report> {
    let run = parse_run(&args.run)?;
    let qrels = parse_qrels(&args.qrels)?;
    report_parse_warnings(&run.warnings);
    report_parse_warnings(&qrels.warnings);
    let ks: Vec<usize> = if args.recall_k.is_empty() {
        cfg.recall_k.clone().unwrap_or_else(|| vec![10, 100])
    } else {
        args.recall_k.clone()
    };
    let report = evaluate_run(&run.value, &qrels.value, &ks)?;
    Ok(Report::Retrieval(report))
}

pub fn eval_mrc(args: &EvalMrcArgs, cfg: &FileConfig) -> CliResult<Report> {
    let dataset = parse_mrc_dataset(&args.gold)?;
    let preds = parse_span_runs(&args.pred, &dataset.value)?;
    report_parse_warnings(&dataset.warnings);
    report_parse_warnings(&preds.warnings);
    let lists = match args.zeta.or(cfg.zeta) {
        None => preds.value,
        Some(zeta) => {
            if !zeta.is_finite() {
                return Err(usage(format!("--zeta must be finite, got {zeta}")));
            }
            let scores = normalize(&gamma_spans(&preds.value)?)?;
            let marked = sigma(&scores, zeta);
            apply_to_span_lists(&preds.value, &marked)
        }
    };
    let report = evaluate_span_runs(&lists, &dataset.value)?;
    Ok(Report::Mrc(report))
}

pub fn span_decode(args: &SpanDecodeArgs, cfg: &FileConfig) -> CliResult<Report> {
    let dataset = parse_mrc_dataset(&args.gold)?;
    let logits = parse_logits(&args.logits)?;
    report_parse_warnings(&dataset.warnings);
    report_parse_warnings(&logits.warnings);
    let max_span_len = args.max_span_len.or(cfg.max_span_len).unwrap_or(30);
    let n_best = args.n_best.or(cfg.n_best).unwrap_or(20);

    let by_id: BTreeMap<&str, &MrcSample> =
        dataset.value.iter().map(|s| (s.sample_id.as_str(), s)).collect();
    let lists: Vec<SpanRankedList> = logits
        .value
        .par_iter()
        .map(|sample_logits| {
            let id = sample_logits.sample_id.as_str();
            let sample = by_id.get(id).copied().ok_or_else(|| {
                Error::integrity(format!("logits supplied for unknown sample {id}"))
            })?;
            let tokens = sample.passage_tokens();
            if sample_logits.n_tokens() != tokens.len() {
                return Err(Error::integrity(format!(
                    "sample {id}: logits cover {} tokens but the passage has {}",
                    sample_logits.n_tokens(),
                    tokens.len()
                )));
            }
            let spans = decode_spans(sample_logits, max_span_len, n_best)?
                .iter()
                .map(|d| {
                    Ok(ScoredSpan {
                        answer: AnswerSpan::from_token_span(&tokens, d.start_token, d.end_token)?,
                        score: d.score,
                    })
                })
                .collect::<rankqa_core::Result<Vec<_>>>()?;
            Ok(SpanRankedList {
                sample_id: id.to_string(),
                spans,
                no_answer_score: Some(no_answer_score(sample_logits)),
            })
        })
        .collect::<rankqa_core::Result<_>>()?;
    write_span_runs(&args.spans_out, &lists)?;

    // The informative summary of a decode is how well the scores fit the
    // gold spans: the span-loss report over the same logits.
    let report = loss_report(&logits.value, &dataset.value)?;
    Ok(Report::Loss(report))
}

pub fn postprocess(args: &PostprocessArgs, cfg: &FileConfig) -> CliResult<Report> {
    let dataset = parse_mrc_dataset(&args.gold)?;
    let preds = parse_span_runs(&args.pred, &dataset.value)?;
    report_parse_warnings(&dataset.warnings);
    report_parse_warnings(&preds.warnings);
    let config = NmsConfig {
        overlap_threshold: args.overlap_threshold.or(cfg.overlap_threshold).unwrap_or(0.5),
        min_token_len: args.min_token_len.or(cfg.min_token_len).unwrap_or(1),
        max_answers: args.max_answers.or(cfg.max_answers).unwrap_or(10),
    };
    let spans_in: usize = preds.value.iter().map(|l| l.spans.len()).sum();
    let lists: Vec<SpanRankedList> = preds
        .value
        .into_par_iter()
        .map(|l| postprocess_list(l, &config))
        .collect::<rankqa_core::Result<_>>()?;
    let spans_kept: usize = lists.iter().map(|l| l.spans.len()).sum();
    write_span_runs(&args.spans_out, &lists)?;
    Ok(Report::Postprocess(PostprocessReport {
        schema_version: schema_version(),
        n_lists: lists.len(),
        spans_in,
        spans_kept,
        overlap_threshold: config.overlap_threshold,
        min_token_len: config.min_token_len,
        max_answers: config.max_answers,
        warnings: Vec::new(),
    }))
}

impl TuneMode {
    fn name(self) -> &'static str {
        match self {
            TuneMode::Search => "search",
            TuneMode::Quantile => "quantile",
            TuneMode::Fixed => "fixed",
        }
    }
}

/// Resolve the threshold for the chosen mode; `search` also yields the trace.
fn choose_zeta(
    mode: TuneMode,
    scores: &rankqa_core::threshold::UnanswerabilityScores,
    metric: impl Fn(&BTreeSet<String>) -> f64,
    fixed_zeta: Option<f64>,
    fraction: Option<f64>,
) -> CliResult<(f64, Option<ThresholdSearch>)> {
    match mode {
        TuneMode::Search => {
            let search = find_best_zeta(scores, metric)?;
            Ok((search.best_zeta, Some(search)))
        }
        TuneMode::Quantile => {
            let fraction = fraction.unwrap_or(0.15);
            Ok((quantile_zeta(scores, fraction)?, None))
        }
        TuneMode::Fixed => {
            let zeta = fixed_zeta.unwrap_or(0.8);
            if !zeta.is_finite() {
                return Err(usage(format!("--zeta must be finite, got {zeta}")));
            }
            Ok((zeta, None))
        }
    }
}

pub fn threshold_tune(args: &ThresholdTuneArgs, cfg: &FileConfig) -> CliResult<Report> {
    let mode = args.mode.or(cfg.mode).unwrap_or(TuneMode::Search);
    if args.trace_out.is_some() && mode != TuneMode::Search {
        return Err(usage("--trace-out is only produced by --mode search"));
    }
    let fixed_zeta = args.zeta.or(cfg.zeta);
    let fraction = args.fraction.or(cfg.fraction);

    match args.task {
        TaskKind::A => {
            if args.spans_out.is_some() {
                return Err(usage("--spans-out applies to --task b; task a writes --run-out"));
            }
            let run = parse_run(args.run.as_ref().expect("clap requires --run for task a"))?;
            let qrels =
                parse_qrels(args.qrels.as_ref().expect("clap requires --qrels for task a"))?;
            report_parse_warnings(&run.warnings);
            report_parse_warnings(&qrels.warnings);

            let scores = normalize(&gamma_retrieval(&run.value)?)?;
            // Evaluate the raw run once so cross-file integrity problems
            // surface as errors before the metric closure assumes them away.
            let baseline = evaluate_run(&run.value, &qrels.value, &[])?;
            let metric = |marked: &BTreeSet<String>| {
                evaluate_run(&apply_to_run(&run.value, marked), &qrels.value, &[])
                    .expect("marking cannot change the evaluated question universe")
                    .map
            };
            let (zeta, search) = choose_zeta(mode, &scores, metric, fixed_zeta, fraction)?;
            let marked = sigma(&scores, zeta);
            let thresholded = apply_to_run(&run.value, &marked);
            let metric_value = evaluate_run(&thresholded, &qrels.value, &[])?.map;
            if let Some(path) = &args.run_out {
                write_run(path, &thresholded)?;
            }
            if let (Some(path), Some(search)) = (&args.trace_out, &search) {
                write_text_file(path, &render::threshold_trace_csv(search))?;
            }
            Ok(Report::Tune(TuneReport {
                schema_version: schema_version(),
                task: "a".into(),
                mode: mode.name().into(),
                zeta,
                metric_name: "map".into(),
                baseline_metric: baseline.map,
                metric: metric_value,
                n_scored: scores.len(),
                n_marked: marked.len(),
                warnings: baseline.warnings,
            }))
        }
        TaskKind::B => {
            if args.run_out.is_some() {
                return Err(usage("--run-out applies to --task a; task b writes --spans-out"));
            }
            let dataset =
                parse_mrc_dataset(args.gold.as_ref().expect("clap requires --gold for task b"))?;
            let preds = parse_span_runs(
                args.pred.as_ref().expect("clap requires --pred for task b"),
                &dataset.value,
            )?;
            report_parse_warnings(&dataset.warnings);
            report_parse_warnings(&preds.warnings);

            let scores = normalize(&gamma_spans(&preds.value)?)?;
            let baseline = evaluate_span_runs(&preds.value, &dataset.value)?;
            let metric = |marked: &BTreeSet<String>| {
                evaluate_span_runs(&apply_to_span_lists(&preds.value, marked), &dataset.value)
                    .expect("marking cannot change the evaluated sample universe")
                    .pap
            };
            let (zeta, search) = choose_zeta(mode, &scores, metric, fixed_zeta, fraction)?;
            let marked = sigma(&scores, zeta);
            let thresholded = apply_to_span_lists(&preds.value, &marked);
            let metric_value = evaluate_span_runs(&thresholded, &dataset.value)?.pap;
            if let Some(path) = &args.spans_out {
                write_span_runs(path, &thresholded)?;
            }
            if let (Some(path), Some(search)) = (&args.trace_out, &search) {
                write_text_file(path, &render::threshold_trace_csv(search))?;
            }
            Ok(Report::Tune(TuneReport {
                schema_version: schema_version(),
                task: "b".into(),
                mode: mode.name().into(),
                zeta,
                metric_name: "pap".into(),
                baseline_metric: baseline.pap,
                metric: metric_value,
                n_scored: scores.len(),
                n_marked: marked.len(),
                warnings: baseline.warnings,
            }))
        }
    }
}

pub fn ensemble(args: &EnsembleArgs, cfg: &FileConfig) -> CliResult<Report> {
    let tag =
        args.tag.clone().or_else(|| cfg.tag.clone()).unwrap_or_else(|| "ensemble".to_string());
    match args.task {
        TaskKind::A => {
            if args.gold.is_some() {
                return Err(usage("--gold applies to --task b"));
            }
            if args.spans_out.is_some() {
                return Err(usage("--spans-out applies to --task b; task a writes --run-out"));
            }
            let mut runs = Vec::with_capacity(args.members.len());
            for path in &args.members {
                let parsed = parse_run(path)?;
                report_parse_warnings(&parsed.warnings);
                runs.push(parsed.value);
            }
            let agg = aggregate_retrieval(&runs, &tag)?;
            if let Some(path) = &args.run_out {
                write_run(path, &agg.value)?;
            }
            Ok(Report::Ensemble(EnsembleReport {
                schema_version: schema_version(),
                task: "a".into(),
                tag,
                n_members: runs.len(),
                n_items: agg.value.predictions.len(),
                warnings: agg.warnings,
            }))
        }
        TaskKind::B => {
            if args.run_out.is_some() {
                return Err(usage("--run-out applies to --task a; task b writes --spans-out"));
            }
            let dataset =
                parse_mrc_dataset(args.gold.as_ref().expect("clap requires --gold for task b"))?;
            report_parse_warnings(&dataset.warnings);
            let mut members = Vec::with_capacity(args.members.len());
            for path in &args.members {
                let parsed = parse_span_runs(path, &dataset.value)?;
                report_parse_warnings(&parsed.warnings);
                members.push(parsed.value);
            }
            let agg = aggregate_spans(&members, &dataset.value)?;
            if let Some(path) = &args.spans_out {
                write_span_runs(path, &agg.value)?;
            }
            Ok(Report::Ensemble(EnsembleReport {
                schema_version: schema_version(),
                task: "b".into(),
                tag,
                n_members: members.len(),
                n_items: agg.value.len(),
                warnings: agg.warnings,
            }))
        }
    }
}

pub fn analyze_leakage_cmd(args: &AnalyzeLeakageArgs) -> CliResult<Report> {
    let dataset = parse_mrc_dataset(&args.dataset)?;
    report_parse_warnings(&dataset.warnings);
    Ok(Report::Leakage(analyze_leakage(&dataset.value)?))
}

pub fn split_faithful_cmd(args: &SplitFaithfulArgs, cfg: &FileConfig) -> CliResult<Report> {
    let dataset = parse_mrc_dataset(&args.dataset)?;
    report_parse_warnings(&dataset.warnings);
    let ratio = args.zero_ratio.or(cfg.zero_ratio).unwrap_or(0.067);
    let split = faithful_split(&dataset.value, ratio)?;
    let partition = |side: Split| -> Vec<MrcSample> {
        dataset.value.iter().filter(|s| split.assignment[&s.sample_id] == side).cloned().collect()
    };
    if let Some(path) = &args.train_out {
        write_mrc_dataset(path, &partition(Split::Train))?;
    }
    if let Some(path) = &args.dev_out {
        write_mrc_dataset(path, &partition(Split::Dev))?;
    }
    Ok(Report::Split(split))
}

fn lexical_search(
    scorer: LexicalScorer,
    scorer_name: &str,
    collection_path: &Path,
    questions_path: &Path,
    params: Bm25Params,
    report_params: bool,
    k: usize,
    tag: &str,
    run_out: Option<&Path>,
) -> CliResult<Report> {
    let collection = parse_collection(collection_path)?;
    let questions = parse_questions(questions_path)?;
    report_parse_warnings(&collection.warnings);
    report_parse_warnings(&questions.warnings);
    let index = InvertedIndex::build(&collection.value);
    let run = lexical_run(&index, &questions.value, scorer, &params, k, tag)?;
    let n_with_hits = run.predictions.values().filter(|p| !p.ranked().is_empty()).count();
    if let Some(path) = run_out {
        write_run(path, &run)?;
    }
    Ok(Report::Search(SearchReport {
        schema_version: schema_version(),
        scorer: scorer_name.into(),
        tag: tag.into(),
        n_documents: index.n_docs(),
        n_terms: index.n_terms(),
        avg_doc_len: index.avg_doc_len(),
        k,
        k1: report_params.then_some(params.k1),
        b: report_params.then_some(params.b),
        n_questions: questions.value.len(),
        n_with_hits,
        warnings: Vec::new(),
    }))
}

pub fn bm25_search_cmd(args: &Bm25SearchArgs, cfg: &FileConfig) -> CliResult<Report> {
    let params = Bm25Params {
        k1: args.k1.or(cfg.k1).unwrap_or(1.2),
        b: args.b.or(cfg.b).unwrap_or(0.75),
    };
    let tag = args.tag.clone().or_else(|| cfg.tag.clone()).unwrap_or_else(|| "bm25".to_string());
    lexical_search(
        LexicalScorer::Bm25,
        "bm25",
        &args.collection,
        &args.questions,
        params,
        true,
        args.k.or(cfg.k).unwrap_or(10),
        &tag,
        args.run_out.as_deref(),
    )
}

pub fn tfidf_search_cmd(args: &TfidfSearchArgs, cfg: &FileConfig) -> CliResult<Report> {
    let tag = args.tag.clone().or_else(|| cfg.tag.clone()).unwrap_or_else(|| "tfidf".to_string());
    lexical_search(
        LexicalScorer::Tfidf,
        "tfidf",
        &args.collection,
        &args.questions,
        Bm25Params::default(),
        false,
        args.k.or(cfg.k).unwrap_or(10),
        &tag,
        args.run_out.as_deref(),
    )
}

pub fn validate(args: &ValidateArgs) -> CliResult<Report> {
    if args.questions.is_none()
        && args.collection.is_none()
        && args.qrels.is_none()
        && args.dataset.is_none()
    {
        return Err(usage(
            "nothing to validate: name at least one of --questions, --collection, \
             --qrels, --dataset",
        ));
    }
    let questions = match &args.questions {
        Some(path) => {
            let parsed = parse_questions(path)?;
            report_parse_warnings(&parsed.warnings);
            Some(parsed.value)
        }
        None => None,
    };
    let collection = match &args.collection {
        Some(path) => {
            let parsed = parse_collection(path)?;
            report_parse_warnings(&parsed.warnings);
            Some(parsed.value)
        }
        None => None,
    };
    let qrels = match &args.qrels {
        Some(path) => {
            let parsed = parse_qrels(path)?;
            report_parse_warnings(&parsed.warnings);
            Some(parsed.value)
        }
        None => None,
    };
    let samples = match &args.dataset {
        Some(path) => {
            let parsed = parse_mrc_dataset(path)?;
            report_parse_warnings(&parsed.warnings);
            Some(parsed.value)
        }
        None => None,
    };
    let report = validate_dataset(
        questions.as_deref(),
        collection.as_ref(),
        qrels.as_ref(),
        samples.as_deref(),
    )?;
    Ok(Report::Validation(report))
}
