//! Report emission: every subcommand produces exactly one report, rendered
//! as pretty JSON, a human-oriented text summary, or CSV, and written to
//! stdout or `--out`. Artifact files (runs, span lists, datasets, traces)
//! are written separately in their canonical interchange formats.

use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use rankqa_core::leakage::{LeakageReport, SplitAssignment};
use rankqa_core::metrics::mrc::MrcReport;
use rankqa_core::metrics::retrieval::RetrievalReport;
use rankqa_core::render;
use rankqa_core::span::LossReport;
use rankqa_core::{Error, Result, ValidationReport, REPORT_SCHEMA_VERSION};

/// Output selector for the report stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Text,
    Csv,
}

/// Threshold-tuning summary: which ζ was chosen, how, and what it scores.
#[derive(Debug, Clone, Serialize)]
pub struct TuneReport {
    pub schema_version: u32,
    /// `a` (retrieval) or `b` (reading comprehension).
    pub task: String,
    /// `search`, `quantile`, or `fixed`.
    pub mode: String,
    /// Chosen threshold, on the normalized [0, 1] score scale.
    pub zeta: f64,
    /// Metric the threshold was scored with (`map` or `pap`).
    pub metric_name: String,
    /// Metric value with no thresholding at all (for comparison).
    pub baseline_metric: f64,
    /// Metric value after marking scores above ζ.
    pub metric: f64,
    /// Items that received an unanswerability score.
    pub n_scored: usize,
    /// Items marked unanswerable at the chosen ζ.
    pub n_marked: usize,
    pub warnings: Vec<String>,
}

/// Voting-ensemble summary.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleReport {
    pub schema_version: u32,
    pub task: String,
    pub tag: String,
    pub n_members: usize,
    /// Questions (task a) or samples (task b) in the aggregate.
    pub n_items: usize,
    pub warnings: Vec<String>,
}

/// Lexical-search summary.
#[derive(Debug, Clone, Serialize)]
pub struct SearchReport {
    pub schema_version: u32,
    /// `bm25` or `tfidf`.
    pub scorer: String,
    pub tag: String,
    pub n_documents: usize,
    pub n_terms: usize,
    pub avg_doc_len: f64,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    pub n_questions: usize,
    /// Questions with at least one scored passage.
    pub n_with_hits: usize,
    pub warnings: Vec<String>,
}

/// Span-suppression summary.
#[derive(Debug, Clone, Serialize)]
pub struct PostprocessReport {
    pub schema_version: u32,
    pub n_lists: usize,
    pub spans_in: usize,
    pub spans_kept: usize,
    pub overlap_threshold: f64,
    pub min_token_len: usize,
    pub max_answers: usize,
    pub warnings: Vec<String>,
}

/// Every report a subcommand can produce.
pub enum Report {
    Retrieval(RetrievalReport),
    Mrc(MrcReport),
    Loss(LossReport),
    Leakage(LeakageReport),
    Split(SplitAssignment),
    Validation(ValidationReport),
    Tune(TuneReport),
    Ensemble(EnsembleReport),
    Search(SearchReport),
    Postprocess(PostprocessReport),
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut body = serde_json::to_string_pretty(value).expect("report serialization is total");
    body.push('\n');
    body
}

fn kv_text(title: &str, rows: &[(&str, String)], warnings: &[String]) -> String {
    let mut out = format!("{title}\n");
    for (field, value) in rows {
        out.push_str(&format!("{field}: {value}\n"));
    }
    out.push_str(&render::warnings_block(warnings));
    out
}

fn kv_csv(rows: &[(&str, String)]) -> String {
    let mut out = String::from("field,value\n");
    for (field, value) in rows {
        out.push_str(&render::csv_row(&[(*field).to_string(), value.clone()]));
        out.push('\n');
    }
    out
}

impl TuneReport {
    fn rows(&self) -> Vec<(&'static str, String)> {
        vec![
            ("task", self.task.clone()),
            ("mode", self.mode.clone()),
            ("zeta", self.zeta.to_string()),
            ("metric_name", self.metric_name.clone()),
            ("baseline_metric", self.baseline_metric.to_string()),
            ("metric", self.metric.to_string()),
            ("n_scored", self.n_scored.to_string()),
            ("n_marked", self.n_marked.to_string()),
        ]
    }

    fn text(&self) -> String {
        let rows = vec![
            ("task", self.task.clone()),
            ("mode", self.mode.clone()),
            ("chosen ζ (normalized scale)", format!("{:.6}", self.zeta)),
            ("items scored", self.n_scored.to_string()),
            ("items marked unanswerable", self.n_marked.to_string()),
            (
                "metric",
                format!(
                    "{} = {:.4} (baseline without thresholding: {:.4})",
                    self.metric_name, self.metric, self.baseline_metric
                ),
            ),
        ];
        kv_text("threshold tuning", &rows, &self.warnings)
    }
}

impl EnsembleReport {
    fn rows(&self) -> Vec<(&'static str, String)> {
        vec![
            ("task", self.task.clone()),
            ("tag", self.tag.clone()),
            ("n_members", self.n_members.to_string()),
            ("n_items", self.n_items.to_string()),
        ]
    }
}

impl SearchReport {
    fn rows(&self) -> Vec<(&'static str, String)> {
        let mut rows = vec![
            ("scorer", self.scorer.clone()),
            ("tag", self.tag.clone()),
            ("n_documents", self.n_documents.to_string()),
            ("n_terms", self.n_terms.to_string()),
            ("avg_doc_len", self.avg_doc_len.to_string()),
            ("k", self.k.to_string()),
        ];
        if let Some(k1) = self.k1 {
            rows.push(("k1", k1.to_string()));
        }
        if let Some(b) = self.b {
            rows.push(("b", b.to_string()));
        }
        rows.push(("n_questions", self.n_questions.to_string()));
        rows.push(("n_with_hits", self.n_with_hits.to_string()));
        rows
    }
}

impl PostprocessReport {
    fn rows(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n_lists", self.n_lists.to_string()),
            ("spans_in", self.spans_in.to_string()),
            ("spans_kept", self.spans_kept.to_string()),
            ("overlap_threshold", self.overlap_threshold.to_string()),
            ("min_token_len", self.min_token_len.to_string()),
            ("max_answers", self.max_answers.to_string()),
        ]
    }
}

impl Report {
    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => match self {
                Report::Retrieval(r) => to_json(r),
                Report::Mrc(r) => to_json(r),
                Report::Loss(r) => to_json(r),
                Report::Leakage(r) => to_json(r),
                Report::Split(r) => to_json(r),
                Report::Validation(r) => to_json(r),
                Report::Tune(r) => to_json(r),
                Report::Ensemble(r) => to_json(r),
                Report::Search(r) => to_json(r),
                Report::Postprocess(r) => to_json(r),
            },
            OutputFormat::Text => match self {
                Report::Retrieval(r) => render::retrieval_text(r),
                Report::Mrc(r) => render::mrc_text(r),
                Report::Loss(r) => render::loss_text(r),
                Report::Leakage(r) => render::leakage_text(r),
                Report::Split(r) => render::split_text(r),
                Report::Validation(r) => render::validation_text(r),
                Report::Tune(r) => r.text(),
                Report::Ensemble(r) => kv_text("ensemble", &r.rows(), &r.warnings),
                Report::Search(r) => kv_text("lexical search", &r.rows(), &r.warnings),
                Report::Postprocess(r) => kv_text("span suppression", &r.rows(), &r.warnings),
            },
            OutputFormat::Csv => match self {
                Report::Retrieval(r) => render::retrieval_csv(r),
                Report::Mrc(r) => render::mrc_csv(r),
                Report::Loss(r) => render::loss_csv(r),
                Report::Leakage(r) => render::leakage_csv(r),
                Report::Split(r) => render::split_csv(r),
                Report::Validation(r) => render::validation_csv(r),
                Report::Tune(r) => kv_csv(&r.rows()),
                Report::Ensemble(r) => kv_csv(&r.rows()),
                Report::Search(r) => kv_csv(&r.rows()),
                Report::Postprocess(r) => kv_csv(&r.rows()),
            },
        }
    }
}

/// A fresh CLI-side report skeleton carries the shared schema version.
pub fn schema_version() -> u32 {
    REPORT_SCHEMA_VERSION
}

/// Render and write the report to `--out` or stdout. A closed stdout pipe
/// (e.g. piping into `head`) ends the program quietly rather than failing.
pub fn emit(report: &Report, format: OutputFormat, out: Option<&Path>) -> Result<()> {
    let body = report.render(format);
    match out {
        Some(path) => std::fs::write(path, body)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source }),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(body.as_bytes()).and_then(|()| stdout.flush()) {
                Ok(()) => Ok(()),
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                Err(source) => Err(Error::Io { path: "<stdout>".into(), source }),
            }
        }
    }
}
