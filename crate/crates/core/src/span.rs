//! Span scoring over start/end token logits.
//!
//! Logit vectors cover the no-answer position at index 0 followed by one
//! position per passage token, so a passage token with index `t` corresponds
//! to logit index `t + 1`. All probabilities come from a softmax over the
//! full vector (no-answer position included).
//!
//! * [`fal_loss`] — first-answer loss: cross-entropy of the first gold
//!   span's boundaries, averaged over start and end;
//! * [`mal_loss`] — multi-answer loss: the same summed over every gold span;
//! * [`decode_spans`] — enumerate candidate spans ranked by joint boundary
//!   log-probability;
//! * [`no_answer_score`] — γ = score(no-answer) − score(best span), the
//!   unanswerability evidence consumed by thresholding.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{AnswerSpan, MrcSample};

/// Probabilities below this floor are clamped before taking logs, so a gold
/// position with (numerically) zero probability yields a large finite loss
/// with the `clamped` flag set instead of +∞.
pub const PROB_FLOOR: f64 = 1e-12;

/// Start/end logits for one sample. Index 0 is the no-answer position.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenLogits {
    pub sample_id: String,
    start: Vec<f64>,
    end: Vec<f64>,
}

impl TokenLogits {
    /// Validate and wrap raw vectors: equal lengths, at least two positions
    /// (no-answer + one token), all finite.
    pub fn new(sample_id: String, start: Vec<f64>, end: Vec<f64>) -> Result<Self> {
        if start.len() != end.len() {
            return Err(Error::contract(format!(
                "sample {sample_id}: start/end logit lengths differ ({} vs {})",
                start.len(),
                end.len()
            )));
        }
        if start.len() < 2 {
            return Err(Error::contract(format!(
                "sample {sample_id}: logit vectors need the no-answer position plus \
                 at least one token (got length {})",
                start.len()
            )));
        }
        for v in start.iter().chain(end.iter()) {
            if !v.is_finite() {
                return Err(Error::contract(format!(
                    "sample {sample_id}: non-finite logit"
                )));
            }
        }
        Ok(TokenLogits { sample_id, start, end })
    }

    /// Number of logit positions (token count + 1).
    pub fn n_positions(&self) -> usize {
        self.start.len()
    }

    /// Number of passage tokens covered.
    pub fn n_tokens(&self) -> usize {
        self.start.len() - 1
    }

    pub fn start_logits(&self) -> &[f64] {
        &self.start
    }

    pub fn end_logits(&self) -> &[f64] {
        &self.end
    }
}

/// Numerically stable softmax (max-subtraction). Errors on empty or
/// non-finite input; the output sums to 1 within 1e-9.
pub fn softmax_probs(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::contract("softmax of an empty vector"));
    }
    let mut max = f64::NEG_INFINITY;
    for &v in logits {
        if !v.is_finite() {
            return Err(Error::contract("softmax input contains a non-finite value"));
        }
        if v > max {
            max = v;
        }
    }
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.iter().map(|&e| e / sum).collect())
}

/// Stable log-softmax: `x_i − (max + ln Σ exp(x_j − max))`.
fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&v| v - lse).collect()
}

/// A loss value plus a flag recording whether the probability floor fired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanLoss {
    pub value: f64,
    /// True when some gold position had probability below [`PROB_FLOOR`].
    pub clamped: bool,
}

fn floored_neg_log(p: f64) -> (f64, bool) {
    if p < PROB_FLOOR {
        (-PROB_FLOOR.ln(), true)
    } else {
        (-p.ln(), false)
    }
}

/// Start/end logit indices of a gold span (no-answer position for an empty
/// gold list).
fn gold_positions(logits: &TokenLogits, gold: &AnswerSpan) -> Result<(usize, usize)> {
    if gold.end_token >= logits.n_tokens() {
        return Err(Error::contract(format!(
            "sample {}: gold span ends at token {} but logits cover {} tokens",
            logits.sample_id,
            gold.end_token,
            logits.n_tokens()
        )));
    }
    Ok((gold.start_token + 1, gold.end_token + 1))
}

/// Cross-entropy of one gold span's boundaries under the given probability
/// vectors, averaged over start and end.
fn boundary_loss(
    start_probs: &[f64],
    end_probs: &[f64],
    start_idx: usize,
    end_idx: usize,
) -> (f64, bool) {
    let (ls, cs) = floored_neg_log(start_probs[start_idx]);
    let (le, ce) = floored_neg_log(end_probs[end_idx]);
    ((ls + le) / 2.0, cs || ce)
}

/// First-answer loss: cross-entropy of the *first* gold span's start and end
/// positions, averaged over the two boundaries. An empty gold list scores
/// the no-answer position (index 0 of both vectors).
pub fn fal_loss(logits: &TokenLogits, gold: &[AnswerSpan]) -> Result<SpanLoss> {
    let start_probs = softmax_probs(logits.start_logits())?;
    let end_probs = softmax_probs(logits.end_logits())?;
    let (s, e) = match gold.first() {
        Some(first) => gold_positions(logits, first)?,
        None => (0, 0),
    };
    let (value, clamped) = boundary_loss(&start_probs, &end_probs, s, e);
    Ok(SpanLoss { value, clamped })
}

/// Multi-answer loss: the boundary cross-entropy summed over *all* gold
/// spans. Equals [`fal_loss`] when there is exactly one gold span; an empty
/// gold list scores the no-answer position, like [`fal_loss`].
pub fn mal_loss(logits: &TokenLogits, gold: &[AnswerSpan]) -> Result<SpanLoss> {
    let start_probs = softmax_probs(logits.start_logits())?;
    let end_probs = softmax_probs(logits.end_logits())?;
    if gold.is_empty() {
        let (value, clamped) = boundary_loss(&start_probs, &end_probs, 0, 0);
        return Ok(SpanLoss { value, clamped });
    }
    let mut value = 0.0;
    let mut clamped = false;
    for g in gold {
        let (s, e) = gold_positions(logits, g)?;
        let (v, c) = boundary_loss(&start_probs, &end_probs, s, e);
        value += v;
        clamped |= c;
    }
    Ok(SpanLoss { value, clamped })
}

/// A candidate answer span in token coordinates with its decode score
/// (joint boundary log-probability).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredTokenSpan {
    pub start_token: usize,
    pub end_token: usize,
    pub score: f64,
}

/// Enumerate candidate spans: every token range with length at most
/// `max_span_len`, scored by `log P(start) + log P(end)`, ranked by score
/// descending with ties broken by earlier start then earlier end, truncated
/// to the `n_best` highest.
pub fn decode_spans(
    logits: &TokenLogits,
    max_span_len: usize,
    n_best: usize,
) -> Result<Vec<ScoredTokenSpan>> {
    if max_span_len == 0 {
        return Err(Error::contract("max_span_len must be at least 1"));
    }
    if n_best == 0 {
        return Err(Error::contract("n_best must be at least 1"));
    }
    let start_lp = log_softmax(logits.start_logits());
    let end_lp = log_softmax(logits.end_logits());
    let n_tokens = logits.n_tokens();
    let mut candidates = Vec::new();
    for s in 0..n_tokens {
        let last = usize::min(n_tokens - 1, s + max_span_len - 1);
        for e in s..=last {
            candidates.push(ScoredTokenSpan {
                start_token: s,
                end_token: e,
                score: start_lp[s + 1] + end_lp[e + 1],
            });
        }
    }
    candidates.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("decode scores are finite")
            .then(a.start_token.cmp(&b.start_token))
            .then(a.end_token.cmp(&b.end_token))
    });
    candidates.truncate(n_best);
    Ok(candidates)
}

/// Unanswerability evidence γ: the no-answer position's score minus the best
/// span score, both in raw logit space (`start + end`); the best span is the
/// maximum of `start[i] + end[j]` over all token pairs `i ≤ j`.
///
/// Positive γ means the model favors "no answer". Adding a constant to every
/// logit leaves γ unchanged.
pub fn no_answer_score(logits: &TokenLogits) -> f64 {
    let start = logits.start_logits();
    let end = logits.end_logits();
    let null = start[0] + end[0];
    let mut best = f64::NEG_INFINITY;
    let mut best_start = f64::NEG_INFINITY;
    for j in 1..logits.n_positions() {
        if start[j] > best_start {
            best_start = start[j];
        }
        let candidate = best_start + end[j];
        if candidate > best {
            best = candidate;
        }
    }
    null - best
}

/// Per-sample row of a span-loss report.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LossRow {
    /// First-answer loss: negative log likelihood of the first gold span.
    pub fal: f64,
    /// Multi-answer loss: summed over all gold spans.
    pub mal: f64,
    /// Whether the probability floor fired for either loss.
    pub clamped: bool,
}

/// Aggregate first-answer / multi-answer losses over a dataset.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LossReport {
    pub schema_version: u32,
    /// Samples actually scored (those with supplied logits).
    pub n_samples: usize,
    pub mean_fal: f64,
    pub mean_mal: f64,
    /// Samples where some gold position fell below the probability floor.
    pub n_clamped: usize,
    pub per_sample: BTreeMap<String, LossRow>,
    pub warnings: Vec<String>,
}

/// Score supplied logits against a dataset's gold answers.
///
/// Logits for a sample id not in the dataset are an integrity error;
/// dataset samples without logits are skipped with a warning. At least one
/// sample must be scored.
pub fn loss_report(logits: &[TokenLogits], dataset: &[MrcSample]) -> Result<LossReport> {
    let by_id: BTreeMap<&str, &MrcSample> =
        dataset.iter().map(|s| (s.sample_id.as_str(), s)).collect();
    let mut rows: BTreeMap<String, LossRow> = BTreeMap::new();
    for sample_logits in logits {
        let Some(sample) = by_id.get(sample_logits.sample_id.as_str()).copied() else {
            return Err(Error::integrity(format!(
                "logits supplied for unknown sample {}",
                sample_logits.sample_id
            )));
        };
        let fal = fal_loss(sample_logits, &sample.gold)?;
        let mal = mal_loss(sample_logits, &sample.gold)?;
        rows.insert(
            sample.sample_id.clone(),
            LossRow { fal: fal.value, mal: mal.value, clamped: fal.clamped || mal.clamped },
        );
    }
    if rows.is_empty() {
        return Err(Error::contract("no samples scored: empty logits input"));
    }
    let mut warnings = Vec::new();
    let missing: Vec<&str> = dataset
        .iter()
        .filter(|s| !rows.contains_key(&s.sample_id))
        .map(|s| s.sample_id.as_str())
        .collect();
    if !missing.is_empty() {
        warnings.push(format!(
            "{} dataset sample(s) have no logits and were skipped: {}{}",
            missing.len(),
            missing.iter().take(5).copied().collect::<Vec<_>>().join(", "),
            if missing.len() > 5 { ", …" } else { "" }
        ));
    }
    let n = rows.len() as f64;
    Ok(LossReport {
        schema_version: crate::model::REPORT_SCHEMA_VERSION,
        n_samples: rows.len(),
        mean_fal: rows.values().map(|r| r.fal).sum::<f64>() / n,
        mean_mal: rows.values().map(|r| r.mal).sum::<f64>() / n,
        n_clamped: rows.values().filter(|r| r.clamped).count(),
        per_sample: rows,
        warnings,
    })
}
