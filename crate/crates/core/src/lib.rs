//! Ranking-based evaluation and dataset tooling for extractive QA over a
//! segmented corpus.
//!
//! The crate covers two linked tasks and the shared machinery around them:
//!
//! * **Passage retrieval** ([`metrics::retrieval`]): ranked runs with an
//!   explicit null-document convention for unanswerable questions, scored
//!   by MAP / MRR / Recall@k where a zero-answer question earns credit only
//!   for predicting the null document.
//! * **Ranked machine reading comprehension** ([`metrics::mrc`]): ranked
//!   answer-span lists scored by partial-match Average Precision (pAP),
//!   where span relevance is graded by token-level F1 against the gold
//!   answers and each gold answer credits at most one rank.
//!
//! Around those sit:
//!
//! * [`span`] — losses over start/end token logits (first-answer and
//!   multi-answer), n-best span decoding, and the unanswerability score γ;
//! * [`postprocess`] — non-maximum suppression and short-answer rejection;
//! * [`threshold`] — zero-answer thresholding: score normalization, the
//!   marking function σ, quantile thresholds, and exhaustive ζ* search;
//! * [`ensemble`] — score-sum voting over retrieval runs and span lists;
//! * [`leakage`] — leakage categorization (D1–D4), disjoint-set leakage
//!   groups, and the faithful train/dev split;
//! * [`lexical`] — BM25 / TF-IDF baselines with an Arabic-aware analyzer;
//! * [`formats`] — the file formats (TSV collections, TREC-style runs,
//!   JSON span runs, JSONL logits) with canonical, round-trip writers;
//! * [`render`] — text and CSV report renderings.
//!
//! Everything is deterministic: map-ordered iteration, order-independent
//! parallel folds, and member-order-independent ensemble sums, so repeated
//! invocations on identical inputs produce byte-identical artifacts.

pub mod ensemble;
pub mod error;
pub mod formats;
pub mod leakage;
pub mod lexical;
pub mod metrics;
pub mod model;
pub mod postprocess;
pub mod render;
pub mod span;
pub mod text;
pub mod threshold;

pub use error::{Error, Result};
pub use model::{
    AnswerSpan, AnswerType, AnswerTypeCounts, MrcSample, Passage, PassageCollection, Qrels,
    Question, RetrievalRun, RunPrediction, ScoredPassage, ScoredSpan, SpanRankedList,
    ValidationReport, MAX_RANKS, NULL_DOC, REPORT_SCHEMA_VERSION,
};
