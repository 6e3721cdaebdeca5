//! Partial-match metrics for ranked extractive MRC answers.
//!
//! An answer is credited by token-overlap F1 against a gold span, not exact
//! match. For a ranked list R and gold set G:
//!
//! ```text
//! F1ᵢ        = token F1 of rank i against the gold span credited to it
//! pPrec@K    = (1/K) Σ_{i ≤ K} F1ᵢ
//! pAP(R)     = Σ_i pPrec@i · [F1ᵢ > 0] / |G|
//! ```
//!
//! Each gold span may be credited to at most one rank. Among all such
//! one-credit assignments of golds to ranks the scoring one — the assignment
//! maximizing pAP — is used, which keeps pAP ≤ 1, makes it 1 exactly for a
//! list that is a permutation-free reading of G, and makes duplicated
//! answers worthless beyond their first occurrence.
//!
//! Zero-answer samples follow the same convention as retrieval: an empty
//! prediction list scores 1, anything else 0. Lists are truncated to
//! [`MAX_RANKS`] before scoring.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    AnswerSpan, AnswerType, MrcSample, ScoredSpan, SpanRankedList, MAX_RANKS,
    REPORT_SCHEMA_VERSION,
};

/// Token-overlap F1 between two spans of the same passage.
///
/// Spans are inclusive token ranges, so the overlap of [s₁,e₁] and [s₂,e₂]
/// is `max(0, min(e₁,e₂) − max(s₁,s₂) + 1)` and
/// `F1 = 2·overlap / (len₁ + len₂)`.
pub fn token_f1(a: &AnswerSpan, b: &AnswerSpan) -> f64 {
    let lo = a.start_token.max(b.start_token);
    let hi = a.end_token.min(b.end_token);
    if hi < lo {
        return 0.0;
    }
    let overlap = (hi - lo + 1) as f64;
    2.0 * overlap / (a.token_len() + b.token_len()) as f64
}

/// Best token F1 of one predicted span against a gold set (0 when empty).
pub fn best_f1(pred: &AnswerSpan, golds: &[AnswerSpan]) -> f64 {
    golds.iter().map(|g| token_f1(pred, g)).fold(0.0, f64::max)
}

/// Partial precision at k: the mean over the first k ranks of each rank's
/// best F1 against the gold set (no credit accounting; this is the
/// uncredited diagnostic, an upper bound of the credited prefix precision).
pub fn pprec_at_k(ranked: &[ScoredSpan], golds: &[AnswerSpan], k: usize) -> Result<f64> {
    if k == 0 || k > ranked.len() {
        return Err(Error::contract(format!(
            "pPrec@k needs 1 ≤ k ≤ {}, got k = {k}",
            ranked.len()
        )));
    }
    let sum: f64 = ranked[..k].iter().map(|s| best_f1(&s.answer, golds)).sum();
    Ok(sum / k as f64)
}

/// Partial-match average precision of a ranked list against a non-empty
/// gold set, under the scoring one-credit assignment.
///
/// The list is expected to be pre-truncated (≤ [`MAX_RANKS`]); longer lists
/// are a contract error here so silent truncation cannot hide in the middle
/// of a pipeline — use [`pap_task_b`] for end-to-end scoring.
pub fn pap(ranked: &[ScoredSpan], golds: &[AnswerSpan]) -> Result<f64> {
    if golds.is_empty() {
        return Err(Error::contract(
            "pAP of a zero-answer sample is undefined; use the empty-list scoring rule",
        ));
    }
    if ranked.len() > MAX_RANKS {
        return Err(Error::contract(format!(
            "ranked list has {} entries; cap is {MAX_RANKS}",
            ranked.len()
        )));
    }
    let f1: Vec<Vec<f64>> = ranked
        .iter()
        .map(|s| golds.iter().map(|g| token_f1(&s.answer, g)).collect())
        .collect();
    Ok(max_credit_pap(&f1, golds.len()))
}

/// Maximize pAP over one-credit assignments of golds to ranks.
///
/// `f1[r][g]` is the token F1 of rank r (0-based) against gold g. For a
/// fixed set S of credited ranks the objective is linear in the per-rank F1:
///
/// ```text
/// pAP·|G| = Σ_{j∈S} F1ⱼ · w_j(S),   w_j(S) = Σ_{i∈S, i ≥ j} 1/i
/// ```
///
/// so the maximum is found by enumerating S over ranks that overlap any gold
/// (≤ 2^10 subsets given the rank cap) and solving a maximum-weight
/// bipartite matching for each S with a subset-DP over credited ranks
/// (golds are iterated linearly, so |G| is not limited).
fn max_credit_pap(f1: &[Vec<f64>], n_golds: usize) -> f64 {
    debug_assert!(f1.len() <= MAX_RANKS);
    if n_golds == 0 {
        return 0.0;
    }
    // Ranks that can be credited at all.
    let cand: Vec<usize> = (0..f1.len())
        .filter(|&r| f1[r].iter().any(|&v| v > 0.0))
        .collect();
    let mut best = 0.0f64;
    for mask in 0u32..(1u32 << cand.len()) {
        let sel: Vec<usize> = (0..cand.len())
            .filter(|&b| mask & (1 << b) != 0)
            .map(|b| cand[b])
            .collect();
        let k = sel.len();
        if k == 0 || k > n_golds {
            continue;
        }
        // w[j] = Σ_{i ∈ sel, i ≥ sel[j]} 1/(i+1) with 1-based rank positions.
        let mut weights = vec![0.0f64; k];
        let mut acc = 0.0;
        for j in (0..k).rev() {
            acc += 1.0 / (sel[j] + 1) as f64;
            weights[j] = acc;
        }
        // Max-weight matching of the k selected ranks to distinct golds with
        // positive F1: 0/1 DP over the credited-rank mask, golds outermost.
        let full = (1usize << k) - 1;
        let mut dp = vec![f64::NEG_INFINITY; full + 1];
        dp[0] = 0.0;
        for g in 0..n_golds {
            for m in (0..=full).rev() {
                if dp[m] == f64::NEG_INFINITY {
                    continue;
                }
                for (bit, &rank) in sel.iter().enumerate() {
                    if m & (1 << bit) == 0 && f1[rank][g] > 0.0 {
                        let v = dp[m] + weights[bit] * f1[rank][g];
                        let next = m | (1 << bit);
                        if v > dp[next] {
                            dp[next] = v;
                        }
                    }
                }
            }
        }
        if dp[full] > best {
            best = dp[full];
        }
    }
    best / n_golds as f64
}

/// End-to-end per-sample score:
/// * zero-answer sample (empty gold) → 1 exactly when the prediction list is
///   empty, else 0;
/// * otherwise pAP of the list truncated to [`MAX_RANKS`].
pub fn pap_task_b(list: &SpanRankedList, golds: &[AnswerSpan]) -> Result<f64> {
    if golds.is_empty() {
        return Ok(if list.spans.is_empty() { 1.0 } else { 0.0 });
    }
    let capped = &list.spans[..list.spans.len().min(MAX_RANKS)];
    pap(capped, golds)
}

/// Per-sample detail row of an MRC report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleScore {
    pub answer_type: AnswerType,
    pub pap: f64,
}

/// Aggregate partial-match AP over a dataset (pAP@10 means).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MrcReport {
    pub schema_version: u32,
    pub n_samples: usize,
    /// Mean per-sample pAP over every dataset sample.
    pub pap: f64,
    /// Mean pAP broken down by answer-cardinality class (absent classes omitted).
    pub per_type_pap: BTreeMap<AnswerType, f64>,
    pub per_sample: BTreeMap<String, SampleScore>,
    pub warnings: Vec<String>,
}

/// Evaluate span predictions against a dataset. The universe is the dataset:
/// a predicted sample id unknown to the dataset is an integrity error, a
/// dataset sample with no prediction is scored as an empty list with a
/// warning, and lists longer than [`MAX_RANKS`] are truncated with a warning.
pub fn evaluate_span_runs(lists: &[SpanRankedList], dataset: &[MrcSample]) -> Result<MrcReport> {
    if dataset.is_empty() {
        return Err(Error::contract("cannot evaluate against an empty dataset"));
    }
    let mut warnings = Vec::new();
    let by_id: BTreeMap<&str, &SpanRankedList> =
        lists.iter().map(|l| (l.sample_id.as_str(), l)).collect();
    let mut unknown: Vec<&str> = lists
        .iter()
        .map(|l| l.sample_id.as_str())
        .filter(|id| !dataset.iter().any(|s| s.sample_id == *id))
        .collect();
    if !unknown.is_empty() {
        unknown.sort_unstable();
        return Err(Error::integrity(format!(
            "predictions for unknown samples: {}",
            unknown.join(", ")
        )));
    }
    let mut missing: Vec<&str> = Vec::new();
    let mut truncated: Vec<&str> = Vec::new();
    for sample in dataset {
        match by_id.get(sample.sample_id.as_str()) {
            None => missing.push(&sample.sample_id),
            Some(l) if l.spans.len() > MAX_RANKS => truncated.push(&sample.sample_id),
            _ => {}
        }
    }
    if !missing.is_empty() {
        missing.sort_unstable();
        warnings.push(format!(
            "{} sample(s) missing from the predictions are scored as empty lists: {}",
            missing.len(),
            missing.join(", ")
        ));
    }
    if !truncated.is_empty() {
        truncated.sort_unstable();
        warnings.push(format!(
            "prediction lists truncated to {MAX_RANKS} for: {}",
            truncated.join(", ")
        ));
    }

    let empty = SpanRankedList::default();
    let jobs: Vec<(&MrcSample, &SpanRankedList)> = dataset
        .iter()
        .map(|s| (s, *by_id.get(s.sample_id.as_str()).unwrap_or(&&empty)))
        .collect();
    // Parallel per-sample scoring; sequential fold keeps results independent
    // of the thread count.
    let scored: Vec<(String, SampleScore)> = jobs
        .par_iter()
        .map(|(sample, list)| {
            let pap = pap_task_b(list, &sample.gold)?;
            Ok((
                sample.sample_id.clone(),
                SampleScore { answer_type: AnswerType::from_count(sample.gold.len()), pap },
            ))
        })
        .collect::<Result<_>>()?;

    let n = scored.len();
    let mut sum = 0.0;
    let mut type_sums: BTreeMap<AnswerType, (f64, usize)> = BTreeMap::new();
    let mut per_sample = BTreeMap::new();
    for (id, score) in scored {
        sum += score.pap;
        let entry = type_sums.entry(score.answer_type).or_insert((0.0, 0));
        entry.0 += score.pap;
        entry.1 += 1;
        per_sample.insert(id, score);
    }
    Ok(MrcReport {
        schema_version: REPORT_SCHEMA_VERSION,
        n_samples: n,
        pap: sum / n as f64,
        per_type_pap: type_sums
            .into_iter()
            .map(|(ty, (s, c))| (ty, s / c as f64))
            .collect(),
        per_sample,
        warnings,
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize_with_offsets;

    const TOL: f64 = 1e-12;

    /// Span over a synthetic passage long enough for the given tokens.
    fn span(start: usize, end: usize) -> AnswerSpan {
        let words: Vec<String> = (0..=end).map(|i| format!("w{i}")).collect();
        let toks = tokenize_with_offsets(&words.join(" "));
        AnswerSpan::from_token_span(&toks, start, end).unwrap()
    }

    fn scored(spans: &[(usize, usize)]) -> Vec<ScoredSpan> {
        spans
            .iter()
            .enumerate()
            .map(|(i, &(s, e))| ScoredSpan { answer: span(s, e), score: 1.0 - 0.1 * i as f64 })
            .collect()
    }

    #[test]
    fn token_f1_worked_example() {
        // pred tokens {3..6} (len 4), gold {5..7} (len 3): overlap 2 → 4/7.
        let f1 = token_f1(&span(3, 6), &span(5, 7));
        assert!((f1 - 4.0 / 7.0).abs() < TOL);
        assert!((token_f1(&span(2, 4), &span(2, 4)) - 1.0).abs() < TOL);
        assert_eq!(token_f1(&span(0, 1), &span(5, 6)), 0.0);
    }

    #[test]
    fn token_f1_is_symmetric() {
        let a = span(1, 5);
        let b = span(4, 9);
        assert!((token_f1(&a, &b) - token_f1(&b, &a)).abs() < TOL);
    }

    #[test]
    fn best_f1_takes_the_maximum() {
        // Against pred (0,4): gold (3,7) → 2·2/10 = 0.4, gold (2,6) → 0.6.
        let pred = span(0, 4);
        let golds = [span(3, 7), span(2, 6)];
        assert!((best_f1(&pred, &golds) - 0.6).abs() < TOL);
        assert_eq!(best_f1(&pred, &[]), 0.0);
        assert!((best_f1(&pred, &[span(0, 4), span(9, 9)]) - 1.0).abs() < TOL);
    }

    #[test]
    fn pprec_examples_and_bounds() {
        // Single gold (5,5); ranks: disjoint then exact → F1s [0, 1].
        let ranked = scored(&[(0, 0), (5, 5)]);
        let golds = [span(5, 5)];
        assert!((pprec_at_k(&ranked, &golds, 2).unwrap() - 0.5).abs() < TOL);
        assert_eq!(pprec_at_k(&ranked, &golds, 1).unwrap(), 0.0);
        assert!(pprec_at_k(&ranked, &golds, 0).is_err());
        assert!(pprec_at_k(&ranked, &golds, 3).is_err());
        // All exact.
        let exact = scored(&[(5, 5)]);
        assert!((pprec_at_k(&exact, &golds, 1).unwrap() - 1.0).abs() < TOL);
    }

    #[test]
    fn pap_single_gold_examples() {
        let golds = [span(5, 5)];
        // Exact match at rank 1 → 1.
        assert!((pap(&scored(&[(5, 5)]), &golds).unwrap() - 1.0).abs() < TOL);
        // Disjoint then exact → pPrec@2 = 0.5 → pAP = 0.5.
        assert!((pap(&scored(&[(0, 0), (5, 5)]), &golds).unwrap() - 0.5).abs() < TOL);
        // No overlap at all → 0.
        assert_eq!(pap(&scored(&[(0, 0)]), &golds).unwrap(), 0.0);
        // Empty list → 0.
        assert_eq!(pap(&[], &golds).unwrap(), 0.0);
    }

    #[test]
    fn pap_two_golds_exact_at_top_two() {
        let golds = [span(0, 1), span(5, 6)];
        let ranked = scored(&[(0, 1), (5, 6)]);
        assert!((pap(&ranked, &golds).unwrap() - 1.0).abs() < TOL);
    }

    #[test]
    fn pap_rejects_empty_gold_and_long_lists() {
        assert!(pap(&scored(&[(0, 0)]), &[]).is_err());
        let long: Vec<(usize, usize)> = (0..11).map(|i| (2 * i, 2 * i)).collect();
        assert!(pap(&scored(&long), &[span(0, 0)]).is_err());
    }

    #[test]
    fn duplicated_answers_earn_no_extra_credit() {
        let golds = [span(5, 5)];
        let once = pap(&scored(&[(5, 5)]), &golds).unwrap();
        let twice = pap(&scored(&[(5, 5), (5, 5)]), &golds).unwrap();
        assert!(twice <= once + TOL);
        assert!(twice <= 1.0 + TOL);
    }

    #[test]
    fn pap_is_rank_sensitive() {
        let golds = [span(5, 5)];
        // Exact span at rank 1 vs. rank 3 behind junk.
        let top = pap(&scored(&[(5, 5), (0, 0), (1, 1)]), &golds).unwrap();
        let buried = pap(&scored(&[(0, 0), (1, 1), (5, 5)]), &golds).unwrap();
        assert!(top > buried);
    }

    #[test]
    fn pap_prefers_the_credit_assignment_that_scores_best() {
        // Rank 1 overlaps both golds (0.9 / 0.8), rank 2 only gold 1 (0.8).
        // Greedy first-come crediting would take 0.9 and strand rank 2 at
        // 0.45 total; the scoring assignment crosses them for 0.8.
        // F1(pred, gold) = 2·overlap/(len_p + len_g):
        //   pred1 = (0, 8), g1 = (0, 9): overlap 9 → 18/19… craft simpler
        // via direct value checks against the exhaustive oracle instead.
        let f1 = vec![vec![0.9, 0.8], vec![0.8, 0.0]];
        let direct = max_credit_pap(&f1, 2);
        assert!((direct - 0.8).abs() < TOL);
        let brute = oracle::exhaustive_pap(&f1, 2);
        assert!((direct - brute).abs() < TOL);
    }

    #[test]
    fn pap_full_gold_list_scores_one() {
        // Predictions exactly re-list the golds (any order): pAP must be 1.
        let golds = [span(0, 1), span(3, 3), span(6, 8)];
        let ranked = scored(&[(3, 3), (0, 1), (6, 8)]);
        assert!((pap(&ranked, &golds).unwrap() - 1.0).abs() < TOL);
    }

    #[test]
    fn pap_matches_exhaustive_oracle_on_small_grids() {
        // Deterministic sweep over synthetic F1 grids (values in {0, ¼, ½, 1}).
        let levels = [0.0, 0.25, 0.5, 1.0];
        let mut checked = 0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let f1 = vec![
                            vec![levels[a], levels[b]],
                            vec![levels[c], levels[d]],
                        ];
                        let fast = max_credit_pap(&f1, 2);
                        let brute = oracle::exhaustive_pap(&f1, 2);
                        assert!(
                            (fast - brute).abs() < TOL,
                            "mismatch on {f1:?}: {fast} vs {brute}"
                        );
                        checked += 1;
                    }
                }
            }
        }
        assert_eq!(checked, 256);
    }

    #[test]
    fn task_b_zero_answer_branch() {
        let empty = SpanRankedList { sample_id: "s".into(), spans: vec![], no_answer_score: None };
        assert_eq!(pap_task_b(&empty, &[]).unwrap(), 1.0);
        let nonempty = SpanRankedList {
            sample_id: "s".into(),
            spans: scored(&[(0, 0)]),
            no_answer_score: None,
        };
        assert_eq!(pap_task_b(&nonempty, &[]).unwrap(), 0.0);
        // Answerable sample with empty prediction list → 0.
        assert_eq!(pap_task_b(&empty, &[span(0, 0)]).unwrap(), 0.0);
    }

    #[test]
    fn task_b_truncates_to_ten() {
        // Exact match at rank 11 is invisible after truncation.
        let mut spans: Vec<(usize, usize)> = (0..10).map(|i| (2 * i + 20, 2 * i + 20)).collect();
        spans.push((5, 5));
        let list = SpanRankedList {
            sample_id: "s".into(),
            spans: scored(&spans),
            no_answer_score: None,
        };
        assert_eq!(pap_task_b(&list, &[span(5, 5)]).unwrap(), 0.0);
    }

    #[test]
    fn dataset_evaluation_scores_missing_predictions_as_empty() {
        let toks = "alpha beta gamma delta";
        let tokens = tokenize_with_offsets(toks);
        let g = AnswerSpan::from_token_span(&tokens, 1, 1).unwrap();
        let dataset = vec![
            MrcSample {
                sample_id: "s1".into(),
                question: "q".into(),
                passage: toks.into(),
                gold: vec![g.clone()],
            },
            MrcSample {
                sample_id: "s2".into(),
                question: "q".into(),
                passage: toks.into(),
                gold: vec![],
            },
        ];
        let pred = vec![SpanRankedList {
            sample_id: "s1".into(),
            spans: vec![ScoredSpan { answer: g, score: 1.0 }],
            no_answer_score: None,
        }];
        let report = evaluate_span_runs(&pred, &dataset).unwrap();
        // s1 perfect, s2 missing → treated as empty list → correct for a
        // zero-answer sample.
        assert!((report.pap - 1.0).abs() < TOL);
        assert!(report.warnings.iter().any(|w| w.contains("s2")));
        assert_eq!(report.per_type_pap[&AnswerType::Zero], 1.0);

        let stray = vec![SpanRankedList {
            sample_id: "sX".into(),
            spans: vec![],
            no_answer_score: None,
        }];
        assert!(matches!(
            evaluate_span_runs(&stray, &dataset),
            Err(Error::Integrity(_))
        ));
    }
}
