//! Domain types: passages, questions, relevance judgments, retrieval runs,
//! MRC samples and answer spans.
//!
//! Conventions that hold everywhere:
//! * ids are opaque non-empty strings and never equal the null-document
//!   marker `"-1"`;
//! * token indices refer to whitespace tokens of the NFC-normalized text
//!   (see [`crate::text`]); token spans are inclusive on both ends;
//! * char offsets are Unicode-scalar offsets over the normalized text with
//!   exclusive end;
//! * ranked lists are ordered non-increasing by score;
//! * a no-answer retrieval prediction is a distinct variant, never a passage.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::text;

/// The on-disk marker for a no-answer prediction in run files.
pub const NULL_DOC: &str = "-1";

/// Maximum length of a ranked prediction list (retrieval and MRC alike).
pub const MAX_RANKS: usize = 10;

/// A retrievable text unit (one pre-segmented passage).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Passage {
    pub id: String,
    pub text: String,
}

/// A natural-language question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub id: String,
    pub text: String,
}

/// An id-indexed set of passages preserving input order.
#[derive(Debug, Clone, Default)]
pub struct PassageCollection {
    passages: Vec<Passage>,
    by_id: BTreeMap<String, usize>,
}

impl PassageCollection {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a passage; duplicate ids and the reserved marker are rejected.
    pub fn push(&mut self, passage: Passage) -> Result<()> {
        if passage.id == NULL_DOC {
            return Err(Error::integrity(format!(
                "passage id {NULL_DOC:?} collides with the null-document marker"
            )));
        }
        if passage.id.is_empty() {
            return Err(Error::integrity("empty passage id"));
        }
        if passage.text.trim().is_empty() {
            return Err(Error::integrity(format!("passage {} has empty text", passage.id)));
        }
        if self.by_id.contains_key(&passage.id) {
            return Err(Error::integrity(format!("duplicate passage id {}", passage.id)));
        }
        self.by_id.insert(passage.id.clone(), self.passages.len());
        self.passages.push(passage);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Passage> {
        self.by_id.get(id).map(|&i| &self.passages[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    /// Passages in input order.
    pub fn iter(&self) -> impl Iterator<Item = &Passage> {
        self.passages.iter()
    }
}

/// Relevance judgments: question id → set of relevant passage ids.
///
/// A question mapped to an empty set is a *known zero-answer question*
/// (ψ(q) = 0); a question absent from the map is simply unjudged, which also
/// yields ψ(q) = 0 but does not enter evaluation universes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    pub judgments: BTreeMap<String, BTreeSet<String>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a question as known and zero-answer (no relevant passages).
    ///
    /// Fails if relevant passages were already recorded for it.
    pub fn mark_zero_answer(&mut self, question_id: &str) -> Result<()> {
        let set = self.judgments.entry(question_id.to_string()).or_default();
        if !set.is_empty() {
            return Err(Error::integrity(format!(
                "question {question_id} has both a zero-answer marker and relevant passages"
            )));
        }
        Ok(())
    }

    /// Record one relevant passage for a question.
    pub fn add_relevant(&mut self, question_id: &str, passage_id: &str) -> Result<()> {
        if passage_id == NULL_DOC {
            return Err(Error::integrity(format!(
                "relevant passage for {question_id} uses the reserved marker {NULL_DOC:?}"
            )));
        }
        self.judgments
            .entry(question_id.to_string())
            .or_default()
            .insert(passage_id.to_string());
        Ok(())
    }

    pub fn relevant(&self, question_id: &str) -> Option<&BTreeSet<String>> {
        self.judgments.get(question_id)
    }

    pub fn contains_question(&self, question_id: &str) -> bool {
        self.judgments.contains_key(question_id)
    }

    /// Question ids in sorted order.
    pub fn question_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }
}

/// One ranked passage in a retrieval run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPassage {
    pub passage_id: String,
    pub score: f64,
}

/// Per-question prediction of a retrieval run: either a declarative
/// "this question has no answer in the collection" or a ranked list.
#[derive(Debug, Clone, PartialEq)]
pub enum RunPrediction {
    /// The single-entry null-document prediction. The score is carried for
    /// file-format fidelity only; no metric reads it.
    NoAnswer { score: f64 },
    /// Ranked passages, non-increasing by score, at most [`MAX_RANKS`] long.
    Ranked(Vec<ScoredPassage>),
}

impl RunPrediction {
    pub fn is_no_answer(&self) -> bool {
        matches!(self, RunPrediction::NoAnswer { .. })
    }

    /// The ranked passages (empty for a no-answer prediction).
    pub fn ranked(&self) -> &[ScoredPassage] {
        match self {
            RunPrediction::NoAnswer { .. } => &[],
            RunPrediction::Ranked(list) => list,
        }
    }
}

/// A retrieval run: a tagged set of per-question predictions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RetrievalRun {
    pub tag: String,
    pub predictions: BTreeMap<String, RunPrediction>,
}

impl RetrievalRun {
    pub fn new(tag: impl Into<String>) -> Self {
        RetrievalRun { tag: tag.into(), predictions: BTreeMap::new() }
    }

    /// Insert a prediction, enforcing the per-question invariants:
    /// list at most [`MAX_RANKS`] long, scores non-increasing, passage ids
    /// distinct and never the null marker, exactly one entry per question.
    pub fn insert(&mut self, question_id: &str, prediction: RunPrediction) -> Result<()> {
        if question_id.is_empty() {
            return Err(Error::integrity("empty question id in run"));
        }
        if self.predictions.contains_key(question_id) {
            return Err(Error::integrity(format!(
                "question {question_id} appears twice in the run"
            )));
        }
        if let RunPrediction::Ranked(list) = &prediction {
            if list.len() > MAX_RANKS {
                return Err(Error::contract(format!(
                    "ranked list for {question_id} has {} entries; cap is {MAX_RANKS} \
                     (truncate before inserting)",
                    list.len()
                )));
            }
            let mut seen = BTreeSet::new();
            for (i, entry) in list.iter().enumerate() {
                if entry.passage_id == NULL_DOC {
                    return Err(Error::integrity(format!(
                        "question {question_id}: null-document marker mixed into a ranked list"
                    )));
                }
                if !entry.score.is_finite() {
                    return Err(Error::contract(format!(
                        "question {question_id}: non-finite score at rank {}",
                        i + 1
                    )));
                }
                if !seen.insert(entry.passage_id.as_str()) {
                    return Err(Error::integrity(format!(
                        "question {question_id}: passage {} ranked twice",
                        entry.passage_id
                    )));
                }
                if i > 0 && list[i - 1].score < entry.score {
                    return Err(Error::integrity(format!(
                        "question {question_id}: scores increase at rank {} \
                         (ranked lists must be non-increasing by score)",
                        i + 1
                    )));
                }
            }
        }
        self.predictions.insert(question_id.to_string(), prediction);
        Ok(())
    }

    pub fn get(&self, question_id: &str) -> Option<&RunPrediction> {
        self.predictions.get(question_id)
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }
}

/// A gold or predicted answer span over passage tokens.
///
/// `start_token..=end_token` index the whitespace tokens of the normalized
/// passage; `start_char..end_char` is the original character range the span
/// was loaded from (or the canonical range of the token span when
/// synthesized); `text` is the token range rendered back to a string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerSpan {
    pub start_token: usize,
    pub end_token: usize,
    pub start_char: usize,
    pub end_char: usize,
    pub text: String,
}

impl AnswerSpan {
    /// Build a span from an inclusive token range over `tokens`,
    /// deriving text and canonical char offsets.
    pub fn from_token_span(
        tokens: &[text::OffsetToken],
        start_token: usize,
        end_token: usize,
    ) -> Result<Self> {
        if start_token > end_token || end_token >= tokens.len() {
            return Err(Error::contract(format!(
                "token span {start_token}..={end_token} out of bounds for {} tokens",
                tokens.len()
            )));
        }
        Ok(AnswerSpan {
            start_token,
            end_token,
            start_char: tokens[start_token].start,
            end_char: tokens[end_token].end,
            text: text::render_span(tokens, start_token, end_token),
        })
    }

    /// Build a span from a character range via the covering-token rule.
    pub fn from_char_range(
        tokens: &[text::OffsetToken],
        start_char: usize,
        end_char: usize,
    ) -> Result<Self> {
        let (start_token, end_token) = text::char_range_to_token_span(tokens, start_char, end_char)
            .ok_or_else(|| {
                Error::contract(format!(
                    "char range {start_char}..{end_char} covers no passage token"
                ))
            })?;
        Ok(AnswerSpan {
            start_token,
            end_token,
            start_char,
            end_char,
            text: text::render_span(tokens, start_token, end_token),
        })
    }

    /// Number of tokens covered (spans are non-empty by construction).
    pub fn token_len(&self) -> usize {
        self.end_token - self.start_token + 1
    }
}

/// A predicted answer span with its model score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSpan {
    pub answer: AnswerSpan,
    pub score: f64,
}

/// Ranked answer spans for one MRC sample, non-increasing by score.
///
/// `no_answer_score` is the sample's unanswerability evidence (higher means
/// more likely unanswerable); it is produced by span decoding, summed by
/// ensembling and consumed by threshold application.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpanRankedList {
    pub sample_id: String,
    pub spans: Vec<ScoredSpan>,
    pub no_answer_score: Option<f64>,
}

impl SpanRankedList {
    /// Validate ordering/finiteness invariants. Length is *not* capped here:
    /// candidate lists may be long; evaluation truncates to [`MAX_RANKS`].
    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.spans.iter().enumerate() {
            if !s.score.is_finite() {
                return Err(Error::contract(format!(
                    "sample {}: non-finite span score at rank {}",
                    self.sample_id,
                    i + 1
                )));
            }
            if i > 0 && self.spans[i - 1].score < s.score {
                return Err(Error::integrity(format!(
                    "sample {}: span scores increase at rank {} \
                     (ranked lists must be non-increasing by score)",
                    self.sample_id,
                    i + 1
                )));
            }
        }
        if let Some(g) = self.no_answer_score {
            if !g.is_finite() {
                return Err(Error::contract(format!(
                    "sample {}: non-finite no-answer score",
                    self.sample_id
                )));
            }
        }
        Ok(())
    }
}

/// One MRC sample: a question paired with one passage and its gold spans.
///
/// `gold` empty ⇔ the sample is a zero-answer sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MrcSample {
    pub sample_id: String,
    pub question: String,
    pub passage: String,
    pub gold: Vec<AnswerSpan>,
}

impl MrcSample {
    pub fn is_zero_answer(&self) -> bool {
        self.gold.is_empty()
    }

    /// Tokenization of the passage under the crate-wide convention.
    pub fn passage_tokens(&self) -> Vec<text::OffsetToken> {
        text::tokenize_with_offsets(&self.passage)
    }
}

/// Gold answer cardinality classes used in per-type breakdowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerType {
    Multi,
    Single,
    Zero,
}

impl AnswerType {
    pub fn from_count(n: usize) -> Self {
        match n {
            0 => AnswerType::Zero,
            1 => AnswerType::Single,
            _ => AnswerType::Multi,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AnswerType::Multi => "multi",
            AnswerType::Single => "single",
            AnswerType::Zero => "zero",
        }
    }
}

/// Counts of questions/samples per answer-cardinality class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AnswerTypeCounts {
    pub multi: usize,
    pub single: usize,
    pub zero: usize,
}

impl AnswerTypeCounts {
    pub fn add(&mut self, ty: AnswerType) {
        match ty {
            AnswerType::Multi => self.multi += 1,
            AnswerType::Single => self.single += 1,
            AnswerType::Zero => self.zero += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.multi + self.single + self.zero
    }
}

/// Summary produced by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub schema_version: u32,
    pub n_questions: usize,
    pub n_passages: usize,
    /// Number of (question, relevant passage) pairs in the qrels.
    pub n_relevance_pairs: usize,
    /// Answer-type breakdown of qrels questions (ψ-based).
    pub retrieval_answer_types: AnswerTypeCounts,
    /// Number of MRC question–passage pairs.
    pub n_samples: usize,
    /// Number of question–passage–answer triplets (zero-answer samples
    /// contribute a pair but no triplet).
    pub n_triplets: usize,
    /// Answer-type breakdown of MRC samples (gold-count based).
    pub mrc_answer_types: AnswerTypeCounts,
    pub warnings: Vec<String>,
}

/// Schema version stamped on every serialized report.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Cross-check a dataset and summarize it.
///
/// All parts are optional so partial datasets can be validated; integrity
/// violations (dangling references, duplicate sample ids) are errors, while
/// benign oddities (empty parts) are listed as warnings. The inputs are
/// borrowed immutably and never modified.
pub fn validate_dataset(
    questions: Option<&[Question]>,
    collection: Option<&PassageCollection>,
    qrels: Option<&Qrels>,
    samples: Option<&[MrcSample]>,
) -> Result<ValidationReport> {
    let mut warnings = Vec::new();
    let mut offenders = Vec::new();

    if let Some(qs) = questions {
        let mut seen = BTreeSet::new();
        for q in qs {
            if !seen.insert(q.id.as_str()) {
                offenders.push(format!("duplicate question id {}", q.id));
            }
            if q.id == NULL_DOC {
                offenders.push(format!("question id {NULL_DOC:?} collides with the null marker"));
            }
        }
    }

    let mut n_relevance_pairs = 0;
    let mut retrieval_types = AnswerTypeCounts::default();
    if let Some(qrels) = qrels {
        for (qid, relevant) in &qrels.judgments {
            n_relevance_pairs += relevant.len();
            retrieval_types.add(AnswerType::from_count(relevant.len()));
            if let Some(qs) = questions {
                if !qs.iter().any(|q| &q.id == qid) {
                    offenders.push(format!("qrels question {qid} missing from question set"));
                }
            }
            if let Some(coll) = collection {
                for pid in relevant {
                    if !coll.contains(pid) {
                        offenders.push(format!(
                            "qrels passage {pid} (question {qid}) missing from collection"
                        ));
                    }
                }
            }
        }
        if qrels.is_empty() {
            warnings.push("qrels contain no questions".to_string());
        }
    }

    let mut n_triplets = 0;
    let mut mrc_types = AnswerTypeCounts::default();
    if let Some(samples) = samples {
        let mut seen = BTreeSet::new();
        for s in samples {
            if !seen.insert(s.sample_id.as_str()) {
                offenders.push(format!("duplicate sample id {}", s.sample_id));
            }
            n_triplets += s.gold.len();
            mrc_types.add(AnswerType::from_count(s.gold.len()));
            let n_tokens = s.passage_tokens().len();
            for g in &s.gold {
                if g.end_token >= n_tokens {
                    offenders.push(format!(
                        "sample {}: gold span ends at token {} but passage has {} tokens",
                        s.sample_id, g.end_token, n_tokens
                    ));
                }
            }
        }
        if samples.is_empty() {
            warnings.push("MRC dataset contains no samples".to_string());
        }
    }

    if !offenders.is_empty() {
        return Err(Error::integrity(offenders.join("; ")));
    }

    Ok(ValidationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        n_questions: questions.map_or_else(
            || qrels.map_or(0, |q| q.len()),
            <[Question]>::len,
        ),
        n_passages: collection.map_or(0, PassageCollection::len),
        n_relevance_pairs,
        retrieval_answer_types: retrieval_types,
        n_samples: samples.map_or(0, <[MrcSample]>::len),
        n_triplets,
        mrc_answer_types: mrc_types,
        warnings,
    })
}
