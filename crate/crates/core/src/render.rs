//! Plain-text and CSV renderings of the report types.
//!
//! Text renderings are human-oriented summary tables (metrics at four
//! decimals); CSV renderings are machine-oriented detail rows with floats
//! at full round-trip precision. Both are deterministic: map-backed report
//! fields iterate in key order.

use crate::leakage::{LeakageReport, SplitAssignment};
use crate::metrics::mrc::MrcReport;
use crate::metrics::retrieval::RetrievalReport;
use crate::model::{AnswerTypeCounts, ValidationReport};
use crate::span::LossReport;
use crate::threshold::ThresholdSearch;

/// Quote a CSV field when it contains a delimiter, quote, or newline.
pub fn csv_field(raw: &str) -> String {
    if raw.contains(',') || raw.contains('"') || raw.contains('\n') || raw.contains('\r') {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

/// Join fields into one CSV row, quoting as needed (no trailing newline).
pub fn csv_row(fields: &[String]) -> String {
    fields.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(",")
}

/// One `warning: …` line per warning, for the tail of text renderings.
pub fn warnings_block(warnings: &[String]) -> String {
    warnings.iter().map(|w| format!("warning: {w}\n")).collect()
}

pub fn retrieval_text(report: &RetrievalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("retrieval evaluation — run tag: {}\n", report.tag));
    out.push_str(&format!("questions evaluated: {}\n", report.n_questions));
    out.push_str(&format!("MAP:  {:.4}\n", report.map));
    out.push_str(&format!("MRR:  {:.4}\n", report.mrr));
    for (k, recall) in &report.recall_at {
        out.push_str(&format!("R@{k}: {recall:.4}\n"));
    }
    if !report.per_type_map.is_empty() {
        out.push_str("MAP by answer type:\n");
        for (ty, map) in &report.per_type_map {
            out.push_str(&format!("  {:<7} {map:.4}\n", ty.label()));
        }
    }
    out.push_str(&warnings_block(&report.warnings));
    out
}

pub fn retrieval_csv(report: &RetrievalReport) -> String {
    let mut out = String::from("question_id,answer_type,ap,rr\n");
    for (qid, scores) in &report.per_question {
        out.push_str(&csv_row(&[
            qid.clone(),
            scores.answer_type.label().to_string(),
            scores.ap.to_string(),
            scores.rr.to_string(),
        ]));
        out.push('\n');
    }
    out
}

pub fn mrc_text(report: &MrcReport) -> String {
    let mut out = String::new();
    out.push_str("ranked MRC evaluation\n");
    out.push_str(&format!("samples evaluated: {}\n", report.n_samples));
    out.push_str(&format!("pAP@10: {:.4}\n", report.pap));
    if !report.per_type_pap.is_empty() {
        out.push_str("pAP by answer type:\n");
        for (ty, pap) in &report.per_type_pap {
            out.push_str(&format!("  {:<7} {pap:.4}\n", ty.label()));
        }
    }
    out.push_str(&warnings_block(&report.warnings));
    out
}

pub fn mrc_csv(report: &MrcReport) -> String {
    let mut out = String::from("sample_id,answer_type,pap\n");
    for (sample_id, score) in &report.per_sample {
        out.push_str(&csv_row(&[
            sample_id.clone(),
            score.answer_type.label().to_string(),
            score.pap.to_string(),
        ]));
        out.push('\n');
    }
    out
}

pub fn threshold_text(search: &ThresholdSearch) -> String {
    let mut out = String::new();
    out.push_str("threshold search\n");
    out.push_str(&format!("candidates evaluated: {}\n", search.trace.len()));
    out.push_str(&format!("best zeta: {}\n", search.best_zeta));
    out.push_str(&format!("metric at best zeta: {:.4}\n", search.best_metric));
    out.push_str(&format!("questions marked unanswerable: {}\n", search.n_marked));
    out
}

/// Candidate-by-candidate curve, one row per evaluated ζ.
pub fn threshold_trace_csv(search: &ThresholdSearch) -> String {
    let mut out = String::from("zeta,metric,n_marked\n");
    for point in &search.trace {
        out.push_str(&format!("{},{},{}\n", point.zeta, point.metric, point.n_marked));
    }
    out
}

pub fn leakage_text(report: &LeakageReport) -> String {
    let mut out = String::new();
    out.push_str("leakage analysis\n");
    out.push_str(&format!(
        "samples: {} ({} zero-answer)\n",
        report.n_samples, report.n_zero_answer
    ));
    out.push_str("category  samples  zero-answer  description\n");
    for (category, count) in &report.category_counts {
        let zero = report.category_zero_counts.get(category).copied().unwrap_or(0);
        out.push_str(&format!(
            "{:<9} {:>7}  {:>11}  {}\n",
            category.label(),
            count,
            zero,
            category.description()
        ));
    }
    out.push_str(&format!(
        "D1 groups: {} ({} zero-answer), largest {}\n",
        report.groups.len(),
        report.n_zero_groups,
        report.max_group_size
    ));
    out
}

pub fn leakage_csv(report: &LeakageReport) -> String {
    let mut out = String::from("sample_id,category\n");
    for (sample_id, category) in &report.categories {
        out.push_str(&csv_row(&[sample_id.clone(), category.label().to_string()]));
        out.push('\n');
    }
    out
}

pub fn split_text(split: &SplitAssignment) -> String {
    let mut out = String::new();
    out.push_str("faithful split\n");
    out.push_str("category  train (zero)  dev (zero)\n");
    for row in &split.rows {
        out.push_str(&format!(
            "{:<9} {:>5} ({:>4})  {:>4} ({:>4})\n",
            row.category.label(),
            row.train.samples,
            row.train.zero_answer,
            row.dev.samples,
            row.dev.zero_answer
        ));
    }
    out.push_str(&format!(
        "{:<9} {:>5} ({:>4})  {:>4} ({:>4})\n",
        "total",
        split.train_total.samples,
        split.train_total.zero_answer,
        split.dev_total.samples,
        split.dev_total.zero_answer
    ));
    out.push_str(&format!(
        "zero-answer groups moved to dev: {}\n",
        split.moved_zero_groups
    ));
    out.push_str(&format!(
        "dev zero-answer ratio: {:.4} (target {:.4})\n",
        split.achieved_zero_ratio, split.target_zero_ratio
    ));
    out.push_str(&warnings_block(&split.warnings));
    out
}

pub fn split_csv(split: &SplitAssignment) -> String {
    let mut out = String::from("category,train,train_zero,dev,dev_zero\n");
    for row in &split.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.category.label(),
            row.train.samples,
            row.train.zero_answer,
            row.dev.samples,
            row.dev.zero_answer
        ));
    }
    out.push_str(&format!(
        "total,{},{},{},{}\n",
        split.train_total.samples,
        split.train_total.zero_answer,
        split.dev_total.samples,
        split.dev_total.zero_answer
    ));
    out
}

fn answer_type_line(counts: &AnswerTypeCounts) -> String {
    format!(
        "{} (multi {}, single {}, zero {})",
        counts.total(),
        counts.multi,
        counts.single,
        counts.zero
    )
}

pub fn validation_text(report: &ValidationReport) -> String {
    let mut out = String::new();
    out.push_str("dataset validation\n");
    out.push_str(&format!("questions: {}\n", report.n_questions));
    out.push_str(&format!("passages: {}\n", report.n_passages));
    out.push_str(&format!("relevance pairs: {}\n", report.n_relevance_pairs));
    out.push_str(&format!(
        "judged questions: {}\n",
        answer_type_line(&report.retrieval_answer_types)
    ));
    out.push_str(&format!("question-passage pairs: {}\n", report.n_samples));
    out.push_str(&format!("question-passage-answer triplets: {}\n", report.n_triplets));
    out.push_str(&format!("pairs by answer type: {}\n", answer_type_line(&report.mrc_answer_types)));
    out.push_str(&warnings_block(&report.warnings));
    out
}

pub fn validation_csv(report: &ValidationReport) -> String {
    let mut out = String::from("field,value\n");
    let rows: Vec<(&str, usize)> = vec![
        ("questions", report.n_questions),
        ("passages", report.n_passages),
        ("relevance_pairs", report.n_relevance_pairs),
        ("judged_multi", report.retrieval_answer_types.multi),
        ("judged_single", report.retrieval_answer_types.single),
        ("judged_zero", report.retrieval_answer_types.zero),
        ("mrc_pairs", report.n_samples),
        ("mrc_triplets", report.n_triplets),
        ("mrc_multi", report.mrc_answer_types.multi),
        ("mrc_single", report.mrc_answer_types.single),
        ("mrc_zero", report.mrc_answer_types.zero),
    ];
    for (field, value) in rows {
        out.push_str(&format!("{field},{value}\n"));
    }
    out
}

pub fn loss_text(report: &LossReport) -> String {
    let mut out = String::new();
    out.push_str("span loss evaluation\n");
    out.push_str(&format!("samples scored: {}\n", report.n_samples));
    out.push_str(&format!("mean first-answer loss:  {:.6}\n", report.mean_fal));
    out.push_str(&format!("mean multi-answer loss:  {:.6}\n", report.mean_mal));
    out.push_str(&format!("samples at probability floor: {}\n", report.n_clamped));
    out.push_str(&warnings_block(&report.warnings));
    out
}

pub fn loss_csv(report: &LossReport) -> String {
    let mut out = String::from("sample_id,fal,mal,clamped\n");
    for (sample_id, row) in &report.per_sample {
        out.push_str(&csv_row(&[
            sample_id.clone(),
            row.fal.to_string(),
            row.mal.to_string(),
            row.clamped.to_string(),
        ]));
        out.push('\n');
    }
    out
}
