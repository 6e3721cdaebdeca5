//! Passage-retrieval metrics with no-answer semantics.
//!
//! For an answerable question (ψ(q) > 0, where ψ counts its relevant
//! passages) a ranked list R is scored by average precision
//!
//! ```text
//! AP(R, q) = Σ_{i : R_i relevant} Prec@i(R, q) / ψ(q)
//! ```
//!
//! so hits missing from the submitted list contribute nothing. For a
//! zero-answer question (ψ(q) = 0) the only correct response is the explicit
//! no-answer prediction, scored 1; anything else scores 0. The same
//! convention extends to reciprocal rank. Recall@k averages over answerable
//! questions only (a zero-answer question has no recall denominator).
//!
//! Aggregates average over every question in the judgment set; a question
//! the run skipped scores 0 and is listed in the report warnings.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    AnswerType, Qrels, RetrievalRun, RunPrediction, ScoredPassage, REPORT_SCHEMA_VERSION,
};

/// ψ(q): the number of passages judged relevant for the question
/// (0 when the question is unjudged or known zero-answer).
pub fn psi(qrels: &Qrels, question_id: &str) -> usize {
    qrels.relevant(question_id).map_or(0, BTreeSet::len)
}

/// Average precision of a ranked list against a non-empty relevant set.
///
/// The denominator is ψ(q), so relevant passages absent from the list pull
/// the score down; list entries are assumed distinct (run invariant).
pub fn average_precision(ranked: &[ScoredPassage], relevant: &BTreeSet<String>) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::contract(
            "average precision of a zero-answer question is undefined; \
             use the no-answer scoring rule",
        ));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, entry) in ranked.iter().enumerate() {
        if relevant.contains(&entry.passage_id) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / relevant.len() as f64)
}

/// Reciprocal rank of the first relevant passage (0 when none is ranked).
fn reciprocal_rank(ranked: &[ScoredPassage], relevant: &BTreeSet<String>) -> f64 {
    ranked
        .iter()
        .position(|e| relevant.contains(&e.passage_id))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// Recall@k: fraction of the relevant set ranked in the top k.
fn recall_at_k(ranked: &[ScoredPassage], relevant: &BTreeSet<String>, k: usize) -> f64 {
    let top = &ranked[..ranked.len().min(k)];
    let hit = top.iter().filter(|e| relevant.contains(&e.passage_id)).count();
    hit as f64 / relevant.len() as f64
}

/// Per-question retrieval score under the no-answer convention:
/// * ψ(q) = 0 → 1 exactly when the prediction is the no-answer marker;
/// * ψ(q) > 0 → AP of the ranked list (a no-answer prediction scores 0).
pub fn question_average_precision(
    prediction: &RunPrediction,
    relevant: &BTreeSet<String>,
) -> Result<f64> {
    if relevant.is_empty() {
        return Ok(if prediction.is_no_answer() { 1.0 } else { 0.0 });
    }
    match prediction {
        RunPrediction::NoAnswer { .. } => Ok(0.0),
        RunPrediction::Ranked(list) => average_precision(list, relevant),
    }
}

/// Reciprocal-rank analogue of [`question_average_precision`].
fn question_reciprocal_rank(prediction: &RunPrediction, relevant: &BTreeSet<String>) -> f64 {
    if relevant.is_empty() {
        return if prediction.is_no_answer() { 1.0 } else { 0.0 };
    }
    reciprocal_rank(prediction.ranked(), relevant)
}

/// Per-question detail row of a retrieval report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuestionScores {
    pub answer_type: AnswerType,
    pub ap: f64,
    pub rr: f64,
}

/// Aggregate retrieval metrics over a judged question set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalReport {
    pub schema_version: u32,
    pub tag: String,
    pub n_questions: usize,
    /// Mean of the per-question AP/no-answer scores over every judged question.
    pub map: f64,
    /// Mean reciprocal rank under the same no-answer convention.
    pub mrr: f64,
    /// Recall@k over answerable questions, keyed by k.
    pub recall_at: BTreeMap<usize, f64>,
    /// Mean AP broken down by answer-cardinality class (absent classes omitted).
    pub per_type_map: BTreeMap<AnswerType, f64>,
    pub per_question: BTreeMap<String, QuestionScores>,
    pub warnings: Vec<String>,
}

/// Evaluation universe: every question in the qrels. A run question missing
/// from the qrels is an integrity error; a qrels question missing from the
/// run scores 0 with a warning.
pub fn evaluate_run(run: &RetrievalRun, qrels: &Qrels, recall_ks: &[usize]) -> Result<RetrievalReport> {
    if qrels.is_empty() {
        return Err(Error::contract("cannot evaluate against empty judgments"));
    }
    for k in recall_ks {
        if *k == 0 {
            return Err(Error::contract("recall cutoff k must be at least 1"));
        }
    }
    let mut warnings = Vec::new();
    let mut unknown: Vec<&str> = run
        .predictions
        .keys()
        .filter(|qid| !qrels.contains_question(qid))
        .map(String::as_str)
        .collect();
    if !unknown.is_empty() {
        unknown.sort_unstable();
        return Err(Error::integrity(format!(
            "run contains unjudged questions: {}",
            unknown.join(", ")
        )));
    }
    let mut missing: Vec<&str> = qrels
        .question_ids()
        .filter(|qid| run.get(qid).is_none())
        .collect();
    if !missing.is_empty() {
        missing.sort_unstable();
        warnings.push(format!(
            "{} question(s) missing from the run score 0: {}",
            missing.len(),
            missing.join(", ")
        ));
    }

    let empty = RunPrediction::Ranked(Vec::new());
    let questions: Vec<(&String, &BTreeSet<String>, &RunPrediction)> = qrels
        .judgments
        .iter()
        .map(|(qid, relevant)| (qid, relevant, run.get(qid).unwrap_or(&empty)))
        .collect();

    // Parallel per-question scoring; the fold below is sequential over the
    // input order, so results do not depend on the thread count.
    let scored: Vec<(String, QuestionScores, Vec<f64>)> = questions
        .par_iter()
        .map(|(qid, relevant, prediction)| {
            let ap = question_average_precision(prediction, relevant)?;
            let rr = question_reciprocal_rank(prediction, relevant);
            let recalls: Vec<f64> = if relevant.is_empty() {
                Vec::new()
            } else {
                recall_ks
                    .iter()
                    .map(|&k| recall_at_k(prediction.ranked(), relevant, k))
                    .collect()
            };
            Ok((
                (*qid).clone(),
                QuestionScores {
                    answer_type: AnswerType::from_count(relevant.len()),
                    ap,
                    rr,
                },
                recalls,
            ))
        })
        .collect::<Result<_>>()?;

    let n = scored.len();
    let mut map_sum = 0.0;
    let mut rr_sum = 0.0;
    let mut recall_sums = vec![0.0; recall_ks.len()];
    let mut n_answerable = 0usize;
    let mut type_sums: BTreeMap<AnswerType, (f64, usize)> = BTreeMap::new();
    let mut per_question = BTreeMap::new();
    for (qid, scores, recalls) in scored {
        map_sum += scores.ap;
        rr_sum += scores.rr;
        if !recalls.is_empty() {
            n_answerable += 1;
            for (sum, r) in recall_sums.iter_mut().zip(&recalls) {
                *sum += r;
            }
        }
        let entry = type_sums.entry(scores.answer_type).or_insert((0.0, 0));
        entry.0 += scores.ap;
        entry.1 += 1;
        per_question.insert(qid, scores);
    }
    if n_answerable == 0 {
        warnings.push("no answerable questions: recall is reported as 0".to_string());
    }
    let recall_at = recall_ks
        .iter()
        .zip(&recall_sums)
        .map(|(&k, &sum)| (k, if n_answerable == 0 { 0.0 } else { sum / n_answerable as f64 }))
        .collect();

    Ok(RetrievalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tag: run.tag.clone(),
        n_questions: n,
        map: map_sum / n as f64,
        mrr: rr_sum / n as f64,
        recall_at,
        per_type_map: type_sums
            .into_iter()
            .map(|(ty, (sum, count))| (ty, sum / count as f64))
            .collect(),
        per_question,
        warnings,
    })
}
