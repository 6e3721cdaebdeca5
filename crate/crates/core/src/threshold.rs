//! Zero-answer thresholding.
//!
//! Each question/sample gets an unanswerability score γ (higher = more
//! likely unanswerable): for retrieval, γ(q) = −Σ of the run's passage
//! scores for q; for MRC, the no-answer evidence produced by span decoding.
//! Raw scores are min–max normalized to γ̄ ∈ [0, 1] across the evaluated
//! set, and an item is marked unanswerable when γ̄ > ζ (strictly).
//!
//! ζ can be fixed, chosen so that a target fraction of items is marked
//! ([`quantile_zeta`]), or searched exhaustively against an arbitrary metric
//! callback over every achievable marked-set ([`find_best_zeta`]). Marked
//! retrieval questions are replaced by the explicit no-answer prediction,
//! marked MRC samples by the empty span list.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{RetrievalRun, RunPrediction, SpanRankedList};

/// Raw and normalized unanswerability score of one item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScorePair {
    pub raw: f64,
    pub normalized: f64,
}

/// Unanswerability scores for a set of items, keyed by question/sample id.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct UnanswerabilityScores {
    pub items: BTreeMap<String, ScorePair>,
}

impl UnanswerabilityScores {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Retrieval unanswerability evidence: γ(q) = −Σ scores of the question's
/// ranked passages. Empty lists and no-answer predictions are contract
/// errors — thresholding consumes *raw* runs, before any marking.
pub fn gamma_retrieval(run: &RetrievalRun) -> Result<BTreeMap<String, f64>> {
    let mut gammas = BTreeMap::new();
    for (qid, prediction) in &run.predictions {
        match prediction {
            RunPrediction::NoAnswer { .. } => {
                return Err(Error::contract(format!(
                    "question {qid}: run already contains a no-answer marker; \
                     thresholding needs the raw ranked run"
                )));
            }
            RunPrediction::Ranked(list) if list.is_empty() => {
                return Err(Error::contract(format!(
                    "question {qid}: empty ranked list has no unanswerability evidence"
                )));
            }
            RunPrediction::Ranked(list) => {
                let sum: f64 = list.iter().map(|e| e.score).sum();
                gammas.insert(qid.clone(), -sum);
            }
        }
    }
    Ok(gammas)
}

/// MRC unanswerability evidence: the per-sample no-answer score carried by
/// the span lists (produced by decoding, preserved by ensembling). A list
/// without that channel is a contract error — thresholding has nothing to
/// threshold on.
pub fn gamma_spans(lists: &[SpanRankedList]) -> Result<BTreeMap<String, f64>> {
    let mut gammas = BTreeMap::new();
    for list in lists {
        match list.no_answer_score {
            Some(score) => {
                gammas.insert(list.sample_id.clone(), score);
            }
            None => {
                return Err(Error::contract(format!(
                    "sample {}: span list carries no no-answer score; \
                     thresholding needs the decoder's no-answer channel",
                    list.sample_id
                )));
            }
        }
    }
    Ok(gammas)
}

/// Min–max normalize raw scores to [0, 1]. A constant input maps to all
/// zeros (no separation, nothing exceeds any ζ ≥ 0). Non-finite scores are
/// contract errors.
pub fn normalize(raw: &BTreeMap<String, f64>) -> Result<UnanswerabilityScores> {
    for (id, v) in raw {
        if !v.is_finite() {
            return Err(Error::contract(format!("non-finite unanswerability score for {id}")));
        }
    }
    let mut items = BTreeMap::new();
    if raw.is_empty() {
        return Ok(UnanswerabilityScores { items });
    }
    let min = raw.values().copied().fold(f64::INFINITY, f64::min);
    let max = raw.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    for (id, &v) in raw {
        let normalized = if range == 0.0 { 0.0 } else { (v - min) / range };
        items.insert(id.clone(), ScorePair { raw: v, normalized });
    }
    Ok(UnanswerabilityScores { items })
}

/// σ: the ids whose normalized score strictly exceeds ζ.
pub fn sigma(scores: &UnanswerabilityScores, zeta: f64) -> BTreeSet<String> {
    scores
        .items
        .iter()
        .filter(|(_, s)| s.normalized > zeta)
        .map(|(id, _)| id.clone())
        .collect()
}

/// ζ marking (approximately) a target fraction of the items: with
/// t = round(fraction·N), the (t+1)-th largest normalized score, so exactly
/// t items are marked unless ties straddle the cut (then fewer).
/// fraction 0 → ζ = 1 (marks nothing); fraction 1 → below the minimum
/// (marks everything).
pub fn quantile_zeta(scores: &UnanswerabilityScores, fraction: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&fraction) || fraction.is_nan() {
        return Err(Error::contract(format!("fraction must lie in [0, 1], got {fraction}")));
    }
    if scores.is_empty() {
        return Err(Error::contract("quantile threshold of an empty score set"));
    }
    let n = scores.len();
    let target = (fraction * n as f64).round() as usize;
    if target == 0 {
        return Ok(1.0);
    }
    let mut sorted: Vec<f64> = scores.items.values().map(|s| s.normalized).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("normalized scores are finite"));
    if target >= n {
        return Ok(sorted[n - 1] - 1.0);
    }
    Ok(sorted[target])
}

/// One evaluated candidate threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub zeta: f64,
    pub metric: f64,
    pub n_marked: usize,
}

/// Result of an exhaustive threshold search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSearch {
    pub best_zeta: f64,
    pub best_metric: f64,
    pub n_marked: usize,
    /// Every candidate evaluated, in ascending ζ order.
    pub trace: Vec<TracePoint>,
}

/// Exhaustive ζ search: candidates are the midpoints between consecutive
/// distinct normalized scores plus one sentinel below the minimum and one
/// above the maximum, which together realize every achievable marked-set.
/// The metric callback is evaluated once per candidate; ties prefer the
/// larger ζ (marking less).
pub fn find_best_zeta(
    scores: &UnanswerabilityScores,
    metric: impl Fn(&BTreeSet<String>) -> f64,
) -> Result<ThresholdSearch> {
    if scores.is_empty() {
        return Err(Error::contract("threshold search over an empty score set"));
    }
    let mut distinct: Vec<f64> = scores.items.values().map(|s| s.normalized).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("normalized scores are finite"));
    distinct.dedup();
    let mut candidates = Vec::with_capacity(distinct.len() + 1);
    candidates.push(distinct[0] - 0.5);
    for pair in distinct.windows(2) {
        candidates.push((pair[0] + pair[1]) / 2.0);
    }
    candidates.push(distinct[distinct.len() - 1] + 0.5);

    let mut trace = Vec::with_capacity(candidates.len());
    let mut best: Option<TracePoint> = None;
    for zeta in candidates {
        let marked = sigma(scores, zeta);
        let value = metric(&marked);
        if !value.is_finite() {
            return Err(Error::contract(format!(
                "metric callback returned a non-finite value at ζ = {zeta}"
            )));
        }
        let point = TracePoint { zeta, metric: value, n_marked: marked.len() };
        // Candidates ascend, so ≥ keeps the largest ζ among metric ties.
        if best.map_or(true, |b| value >= b.metric) {
            best = Some(point);
        }
        trace.push(point);
    }
    let best = best.expect("at least two candidates were evaluated");
    Ok(ThresholdSearch {
        best_zeta: best.zeta,
        best_metric: best.metric,
        n_marked: best.n_marked,
        trace,
    })
}

/// Zero-answer classification accuracy as a metric callback: the fraction of
/// items whose marked/unmarked state matches `labels` (true = zero-answer).
pub fn classification_accuracy(
    labels: &BTreeMap<String, bool>,
) -> impl Fn(&BTreeSet<String>) -> f64 + '_ {
    move |marked: &BTreeSet<String>| {
        if labels.is_empty() {
            return 0.0;
        }
        let correct = labels
            .iter()
            .filter(|(id, &is_zero)| marked.contains(*id) == is_zero)
            .count();
        correct as f64 / labels.len() as f64
    }
}

/// Replace the predictions of marked questions by the no-answer marker
/// (written with score 0; no metric reads it).
pub fn apply_to_run(run: &RetrievalRun, marked: &BTreeSet<String>) -> RetrievalRun {
    let mut out = RetrievalRun::new(run.tag.clone());
    for (qid, prediction) in &run.predictions {
        let replaced = if marked.contains(qid) {
            RunPrediction::NoAnswer { score: 0.0 }
        } else {
            prediction.clone()
        };
        out.predictions.insert(qid.clone(), replaced);
    }
    out
}

/// Empty the span lists of marked samples (their no-answer evidence is kept).
pub fn apply_to_span_lists(lists: &[SpanRankedList], marked: &BTreeSet<String>) -> Vec<SpanRankedList> {
    lists
        .iter()
        .map(|l| {
            if marked.contains(&l.sample_id) {
                SpanRankedList {
                    sample_id: l.sample_id.clone(),
                    spans: Vec::new(),
                    no_answer_score: l.no_answer_score,
                }
            } else {
                l.clone()
            }
        })
        .collect()
}
