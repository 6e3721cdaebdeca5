//! Post-processing of decoded spans: non-maximum suppression over
//! token-F1 overlap, and short-answer rejection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::mrc::token_f1;
use crate::model::{ScoredSpan, SpanRankedList};

/// Non-maximum-suppression settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmsConfig {
    /// Token-F1 overlap above which a lower-scored span is suppressed
    /// (strictly greater; 1.0 suppresses only exact duplicates).
    pub overlap_threshold: f64,
    /// Spans shorter than this many tokens are rejected before
    /// suppression. 1 disables rejection.
    pub min_token_len: usize,
    /// Maximum answers kept.
    pub max_answers: usize,
}

impl Default for NmsConfig {
    fn default() -> Self {
        NmsConfig { overlap_threshold: 0.5, min_token_len: 1, max_answers: 10 }
    }
}

impl NmsConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.overlap_threshold.is_finite() || !(0.0..=1.0).contains(&self.overlap_threshold) {
            return Err(Error::contract(format!(
                "overlap threshold must be in [0, 1], got {}",
                self.overlap_threshold
            )));
        }
        if self.max_answers == 0 {
            return Err(Error::contract("max answers must be >= 1"));
        }
        Ok(())
    }
}

/// Remove spans shorter than `min_token_len` tokens, preserving order.
pub fn reject_short(spans: Vec<ScoredSpan>, min_token_len: usize) -> Vec<ScoredSpan> {
    spans.into_iter().filter(|s| s.answer.token_len() >= min_token_len).collect()
}

fn overlap(a: &ScoredSpan, b: &ScoredSpan) -> f64 {
    token_f1(&a.answer, &b.answer)
}

/// Greedy non-maximum suppression: repeatedly keep the highest-scored
/// remaining span and drop every remaining span whose token-F1 overlap
/// with it strictly exceeds the threshold; stop at `max_answers`.
///
/// Candidates are considered in (score desc, start asc, end asc) order, so
/// equal scores favor the earlier span. The kept list is a subsequence of
/// that ordering, which makes the operation idempotent.
pub fn nms_spans(candidates: Vec<ScoredSpan>, config: &NmsConfig) -> Result<Vec<ScoredSpan>> {
    config.validate()?;
    for span in &candidates {
        if !span.score.is_finite() {
            return Err(Error::contract(format!(
                "candidate span {}..={} has non-finite score",
                span.answer.start_token, span.answer.end_token
            )));
        }
    }
    let mut ordered = reject_short(candidates, config.min_token_len);
    ordered.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.answer.start_token.cmp(&b.answer.start_token))
            .then(a.answer.end_token.cmp(&b.answer.end_token))
    });

    let mut kept: Vec<ScoredSpan> = Vec::new();
    for candidate in ordered {
        if kept.len() == config.max_answers {
            break;
        }
        if kept.iter().all(|k| overlap(k, &candidate) <= config.overlap_threshold) {
            kept.push(candidate);
        }
    }
    Ok(kept)
}

/// Full pipeline over one ranked list: rejection, suppression, truncation.
/// The no-answer score channel passes through untouched.
pub fn postprocess_list(list: SpanRankedList, config: &NmsConfig) -> Result<SpanRankedList> {
    let spans = nms_spans(list.spans, config)?;
    Ok(SpanRankedList { sample_id: list.sample_id, spans, no_answer_score: list.no_answer_score })
}
