//! Score-sum ensembling of retrieval runs and span runs.
//!
//! The combined relevance of a candidate is the sum of its scores across the
//! member systems (a member that did not rank the candidate contributes 0),
//! and candidates are re-ranked by that sum. Ties break by the best rank any
//! member gave the candidate, then by id — which both preserves a member's
//! own ordering when the ensemble is k copies of one run and keeps the
//! result invariant under permuting the members.
//!
//! Per-candidate member scores are summed in value order (not member order),
//! so the floating-point result is *exactly* permutation-invariant.
//!
//! Inputs must be raw (pre-threshold) outputs: a no-answer marker inside a
//! member is an integrity error. Thresholding is applied after aggregation.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::formats::Parsed;
use crate::model::{
    MrcSample, RetrievalRun, RunPrediction, ScoredPassage, ScoredSpan, SpanRankedList, MAX_RANKS,
};
use crate::model::AnswerSpan;

/// Sum the member scores in a member-order-independent way.
fn permutation_invariant_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    values.iter().sum()
}

struct Accumulated {
    scores: Vec<f64>,
    best_rank: usize,
}

/// Aggregate retrieval runs by score sum.
///
/// The question universe is the union over members; questions covered by
/// only some members are aggregated from those members (with a warning
/// naming the first few). Output lists are truncated to [`MAX_RANKS`].
pub fn aggregate_retrieval(runs: &[RetrievalRun], tag: &str) -> Result<Parsed<RetrievalRun>> {
    if runs.is_empty() {
        return Err(Error::contract("ensemble of zero runs"));
    }
    let mut warnings = Vec::new();

    // question → passage → accumulated member evidence.
    let mut questions: BTreeMap<&str, BTreeMap<&str, Accumulated>> = BTreeMap::new();
    let mut coverage: BTreeMap<&str, usize> = BTreeMap::new();
    for run in runs {
        for (qid, prediction) in &run.predictions {
            match prediction {
                RunPrediction::NoAnswer { .. } => {
                    return Err(Error::integrity(format!(
                        "question {qid}: member run {} already applied no-answer marking; \
                         ensemble inputs must be raw runs",
                        run.tag
                    )));
                }
                RunPrediction::Ranked(list) => {
                    *coverage.entry(qid).or_insert(0) += 1;
                    let per_passage = questions.entry(qid).or_default();
                    for (i, entry) in list.iter().enumerate() {
                        let acc = per_passage
                            .entry(entry.passage_id.as_str())
                            .or_insert(Accumulated { scores: Vec::new(), best_rank: usize::MAX });
                        acc.scores.push(entry.score);
                        acc.best_rank = acc.best_rank.min(i + 1);
                    }
                }
            }
        }
    }
    let partial: Vec<&&str> =
        coverage.iter().filter(|(_, &n)| n < runs.len()).map(|(qid, _)| qid).collect();
    if !partial.is_empty() {
        let shown: Vec<&str> = partial.iter().take(5).map(|q| **q).collect();
        warnings.push(format!(
            "{} question(s) are missing from some members (scored by the members \
             that rank them): {}{}",
            partial.len(),
            shown.join(", "),
            if partial.len() > 5 { ", …" } else { "" }
        ));
    }

    let mut out = RetrievalRun::new(tag);
    for (qid, per_passage) in questions {
        let mut combined: Vec<(f64, usize, &str)> = per_passage
            .into_iter()
            .map(|(pid, acc)| (permutation_invariant_sum(acc.scores), acc.best_rank, pid))
            .collect();
        combined.sort_by(|a, b| {
            b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(b.2))
        });
        combined.truncate(MAX_RANKS);
        let list = combined
            .into_iter()
            .map(|(score, _, pid)| ScoredPassage { passage_id: pid.to_string(), score })
            .collect();
        // Summed scores sorted descending satisfy the run invariants by
        // construction; insert enforces them anyway.
        out.insert(qid, RunPrediction::Ranked(list))?;
    }
    Ok(Parsed { value: out, warnings })
}

/// Aggregate span runs by score sum.
///
/// Span identity is the exact token span (start, end); merged spans take the
/// canonical text/char range recomputed from the sample's passage. Each
/// sample's no-answer evidence is the sum of the member values when every
/// covering member provides one, otherwise absent (with a warning).
pub fn aggregate_spans(
    members: &[Vec<SpanRankedList>],
    dataset: &[MrcSample],
) -> Result<Parsed<Vec<SpanRankedList>>> {
    if members.is_empty() {
        return Err(Error::contract("ensemble of zero span runs"));
    }
    let mut warnings = Vec::new();
    let by_id: BTreeMap<&str, &MrcSample> =
        dataset.iter().map(|s| (s.sample_id.as_str(), s)).collect();

    struct SampleAcc {
        spans: BTreeMap<(usize, usize), Accumulated>,
        gamma: Vec<f64>,
        n_members: usize,
    }
    let mut samples: BTreeMap<&str, SampleAcc> = BTreeMap::new();
    for member in members {
        for list in member {
            if !by_id.contains_key(list.sample_id.as_str()) {
                return Err(Error::integrity(format!(
                    "ensemble member predicts unknown sample {}",
                    list.sample_id
                )));
            }
            let acc = samples.entry(list.sample_id.as_str()).or_insert(SampleAcc {
                spans: BTreeMap::new(),
                gamma: Vec::new(),
                n_members: 0,
            });
            acc.n_members += 1;
            if let Some(g) = list.no_answer_score {
                acc.gamma.push(g);
            }
            for (i, span) in list.spans.iter().enumerate() {
                let key = (span.answer.start_token, span.answer.end_token);
                let slot = acc
                    .spans
                    .entry(key)
                    .or_insert(Accumulated { scores: Vec::new(), best_rank: usize::MAX });
                slot.scores.push(span.score);
                slot.best_rank = slot.best_rank.min(i + 1);
            }
        }
    }

    let mut out = Vec::with_capacity(samples.len());
    let mut partial_gamma: Vec<&str> = Vec::new();
    for (sample_id, acc) in samples {
        let sample = by_id[sample_id];
        let tokens = sample.passage_tokens();
        let mut combined: Vec<(f64, usize, (usize, usize))> = acc
            .spans
            .into_iter()
            .map(|(key, slot)| (permutation_invariant_sum(slot.scores), slot.best_rank, key))
            .collect();
        combined.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        combined.truncate(MAX_RANKS);
        let mut spans = Vec::with_capacity(combined.len());
        for (score, _, (s, e)) in combined {
            let answer = AnswerSpan::from_token_span(&tokens, s, e).map_err(|err| {
                Error::integrity(format!("sample {sample_id}: member span {s}..={e}: {err}"))
            })?;
            spans.push(ScoredSpan { answer, score });
        }
        let no_answer_score = if acc.gamma.len() == acc.n_members && !acc.gamma.is_empty() {
            Some(permutation_invariant_sum(acc.gamma))
        } else {
            if !acc.gamma.is_empty() {
                partial_gamma.push(sample_id);
            }
            None
        };
        out.push(SpanRankedList { sample_id: sample_id.to_string(), spans, no_answer_score });
    }
    if !partial_gamma.is_empty() {
        warnings.push(format!(
            "no-answer scores dropped for {} sample(s) because only some members \
             provide them: {}",
            partial_gamma.len(),
            partial_gamma.iter().take(5).copied().collect::<Vec<_>>().join(", ")
        ));
    }
    Ok(Parsed { value: out, warnings })
}
