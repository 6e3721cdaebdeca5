//! On-disk formats: parsers and writers.
//!
//! * collection / queries: TSV `id<TAB>text`, one record per line;
//! * relevance judgments: TREC-style `question_id 0 passage_id rel`
//!   (whitespace-separated, constant columns tolerated, `-1` as passage id
//!   marks a known zero-answer question);
//! * retrieval runs: TREC-style `question_id Q0 passage_id rank score tag`
//!   (whitespace-separated on input, TAB-separated canonical output,
//!   passage id `-1` is the no-answer marker and must be the question's
//!   only row);
//! * MRC datasets and span runs: JSON arrays of per-sample objects with
//!   character-offset spans (offsets are Unicode-scalar positions over the
//!   NFC-normalized passage text, end exclusive);
//! * token logits: JSON lines, one `{sample_id, start_logits, end_logits}`
//!   object per line, index 0 of both vectors being the no-answer position.
//!
//! Parsers reject malformed lines with path and line number, reject
//! non-finite numbers, enforce per-question/per-sample integrity rules, and
//! report benign oddities (empty files, over-long lists being truncated) as
//! warnings. Writers emit canonical form: records sorted by id, ranks
//! renumbered from 1, floats in shortest round-trip notation, so
//! write ∘ parse is idempotent.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    AnswerSpan, MrcSample, Passage, PassageCollection, Qrels, Question, RetrievalRun,
    RunPrediction, ScoredPassage, ScoredSpan, SpanRankedList, MAX_RANKS, NULL_DOC,
};
use crate::span::TokenLogits;
use crate::text;

/// A parse result together with non-fatal warnings.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Iterate non-empty lines with 1-based line numbers, tolerating CRLF.
fn lines(contents: &str) -> impl Iterator<Item = (usize, &str)> {
    contents
        .lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.trim_end_matches('\r')))
        .filter(|(_, line)| !line.trim().is_empty())
}

fn parse_finite(path: &Path, line_no: usize, field: &str, what: &str) -> Result<f64> {
    let value = f64::from_str(field)
        .map_err(|_| Error::parse(path, line_no, format!("invalid {what} {field:?}")))?;
    if !value.is_finite() {
        return Err(Error::parse(path, line_no, format!("non-finite {what} {field:?}")));
    }
    Ok(value)
}

// ---------------------------------------------------------------------------
// id<TAB>text files (collection, queries)
// ---------------------------------------------------------------------------

fn parse_id_text_pairs(path: &Path) -> Result<Vec<(String, String, usize)>> {
    let contents = read_file(path)?;
    let mut rows = Vec::new();
    for (line_no, line) in lines(&contents) {
        let (id, text) = line.split_once('\t').ok_or_else(|| {
            Error::parse(path, line_no, "expected id<TAB>text, found no tab separator")
        })?;
        if id.trim().is_empty() {
            return Err(Error::parse(path, line_no, "empty id"));
        }
        rows.push((id.trim().to_string(), text.to_string(), line_no));
    }
    Ok(rows)
}

/// Parse a passage collection from `passage_id<TAB>text` lines.
pub fn parse_collection(path: &Path) -> Result<Parsed<PassageCollection>> {
    let mut collection = PassageCollection::new();
    let mut warnings = Vec::new();
    for (id, text, line_no) in parse_id_text_pairs(path)? {
        collection
            .push(Passage { id, text })
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
    }
    if collection.is_empty() {
        warnings.push(format!("{}: collection is empty", path.display()));
    }
    Ok(Parsed { value: collection, warnings })
}

/// Parse questions/queries from `question_id<TAB>text` lines.
pub fn parse_questions(path: &Path) -> Result<Parsed<Vec<Question>>> {
    let mut questions = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut warnings = Vec::new();
    for (id, text, line_no) in parse_id_text_pairs(path)? {
        if !seen.insert(id.clone()) {
            return Err(Error::parse(path, line_no, format!("duplicate question id {id}")));
        }
        if text.trim().is_empty() {
            return Err(Error::parse(path, line_no, format!("question {id} has empty text")));
        }
        questions.push(Question { id, text });
    }
    if questions.is_empty() {
        warnings.push(format!("{}: no questions", path.display()));
    }
    Ok(Parsed { value: questions, warnings })
}

// ---------------------------------------------------------------------------
// Relevance judgments
// ---------------------------------------------------------------------------

/// Parse TREC-style relevance judgments.
///
/// Lines read `question_id <iter> passage_id <relevance>`; the second column
/// is ignored, relevance > 0 marks the passage relevant, relevance 0 only
/// registers the question as judged. Passage id `-1` marks the question as
/// known zero-answer.
pub fn parse_qrels(path: &Path) -> Result<Parsed<Qrels>> {
    let contents = read_file(path)?;
    let mut qrels = Qrels::new();
    let mut warnings = Vec::new();
    for (line_no, line) in lines(&contents) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 4 columns, found {}", cols.len()),
            ));
        }
        let (qid, pid, rel) = (cols[0], cols[2], cols[3]);
        let relevance = i64::from_str(rel)
            .map_err(|_| Error::parse(path, line_no, format!("invalid relevance {rel:?}")))?;
        if pid == NULL_DOC {
            qrels
                .mark_zero_answer(qid)
                .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        } else if relevance > 0 {
            qrels
                .add_relevant(qid, pid)
                .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        } else {
            // Non-relevant judgment: registers the question, adds no pair.
            qrels.judgments.entry(qid.to_string()).or_default();
        }
    }
    if qrels.is_empty() {
        warnings.push(format!("{}: no judgments", path.display()));
    }
    Ok(Parsed { value: qrels, warnings })
}

// ---------------------------------------------------------------------------
// Retrieval runs
// ---------------------------------------------------------------------------

/// Parse a TREC-style run file.
///
/// Per-question lists longer than [`MAX_RANKS`] are truncated (file order)
/// with a warning; a `-1` row must be its question's only row; scores must be
/// finite and non-increasing in file order; the rank column is informational
/// and ignored.
pub fn parse_run(path: &Path) -> Result<Parsed<RetrievalRun>> {
    let contents = read_file(path)?;
    let mut warnings = Vec::new();

    struct Rows {
        ranked: Vec<ScoredPassage>,
        null_score: Option<f64>,
        first_line: usize,
    }
    let mut per_question: BTreeMap<String, Rows> = BTreeMap::new();
    let mut tag: Option<String> = None;

    for (line_no, line) in lines(&contents) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 6 columns (qid Q0 pid rank score tag), found {}", cols.len()),
            ));
        }
        let (qid, pid, score_col, line_tag) = (cols[0], cols[2], cols[4], cols[5]);
        let score = parse_finite(path, line_no, score_col, "score")?;
        match &tag {
            None => tag = Some(line_tag.to_string()),
            Some(t) if t != line_tag => {
                warnings.push(format!(
                    "{}:{line_no}: mixed run tags ({t:?} vs {line_tag:?}); keeping {t:?}",
                    path.display()
                ));
            }
            _ => {}
        }
        let entry = per_question
            .entry(qid.to_string())
            .or_insert_with(|| Rows { ranked: Vec::new(), null_score: None, first_line: line_no });
        if pid == NULL_DOC {
            if entry.null_score.is_some() {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("question {qid} has two no-answer rows"),
                ));
            }
            entry.null_score = Some(score);
        } else {
            entry.ranked.push(ScoredPassage { passage_id: pid.to_string(), score });
        }
    }

    let mut run = RetrievalRun::new(tag.unwrap_or_default());
    for (qid, mut rows) in per_question {
        let prediction = match rows.null_score {
            Some(score) if rows.ranked.is_empty() => RunPrediction::NoAnswer { score },
            Some(_) => {
                return Err(Error::integrity(format!(
                    "question {qid}: no-answer marker mixed with ranked passages \
                     (a no-answer prediction must be the only row)"
                )));
            }
            None => {
                if rows.ranked.len() > MAX_RANKS {
                    warnings.push(format!(
                        "{}: question {qid}: {} entries truncated to {MAX_RANKS}",
                        path.display(),
                        rows.ranked.len()
                    ));
                    rows.ranked.truncate(MAX_RANKS);
                }
                RunPrediction::Ranked(rows.ranked)
            }
        };
        run.insert(&qid, prediction).map_err(|e| match e {
            Error::Integrity(msg) | Error::Contract(msg) => {
                Error::parse(path, rows.first_line, msg)
            }
            other => other,
        })?;
    }
    if run.is_empty() {
        warnings.push(format!("{}: run is empty", path.display()));
    }
    Ok(Parsed { value: run, warnings })
}

/// Render a run in canonical TREC form: questions sorted by id, ranks
/// renumbered from 1, TAB-separated, shortest round-trip float notation.
pub fn render_run(run: &RetrievalRun) -> String {
    let mut out = String::new();
    let tag = if run.tag.is_empty() { "run" } else { &run.tag };
    for (qid, prediction) in &run.predictions {
        match prediction {
            RunPrediction::NoAnswer { score } => {
                let _ = writeln!(out, "{qid}\tQ0\t{NULL_DOC}\t1\t{score}\t{tag}");
            }
            RunPrediction::Ranked(list) => {
                for (i, entry) in list.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{qid}\tQ0\t{}\t{}\t{}\t{tag}",
                        entry.passage_id,
                        i + 1,
                        entry.score
                    );
                }
            }
        }
    }
    out
}

/// Write a run file in canonical form (see [`render_run`]).
pub fn write_run(path: &Path, run: &RetrievalRun) -> Result<()> {
    std::fs::write(path, render_run(run))
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

// ---------------------------------------------------------------------------
// MRC dataset JSON
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct MrcSampleFile {
    sample_id: String,
    question: String,
    passage: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    answers: Vec<GoldSpanFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GoldSpanFile {
    start_char: usize,
    end_char: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
}

/// Parse an MRC dataset: a JSON array of samples with character-offset gold
/// spans (empty/missing `answers` ⇔ zero-answer sample).
pub fn parse_mrc_dataset(path: &Path) -> Result<Parsed<Vec<MrcSample>>> {
    let contents = read_file(path)?;
    let rows: Vec<MrcSampleFile> = serde_json::from_str(&contents)
        .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    let mut warnings = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut samples = Vec::with_capacity(rows.len());
    for row in rows {
        if row.sample_id.is_empty() {
            return Err(Error::integrity(format!("{}: empty sample id", path.display())));
        }
        if !seen.insert(row.sample_id.clone()) {
            return Err(Error::integrity(format!(
                "{}: duplicate sample id {}",
                path.display(),
                row.sample_id
            )));
        }
        let tokens = text::tokenize_with_offsets(&row.passage);
        if tokens.is_empty() {
            return Err(Error::integrity(format!(
                "{}: sample {} has an empty passage",
                path.display(),
                row.sample_id
            )));
        }
        let mut gold = Vec::with_capacity(row.answers.len());
        for ans in &row.answers {
            if ans.start_char >= ans.end_char {
                return Err(Error::integrity(format!(
                    "{}: sample {}: empty answer char range {}..{}",
                    path.display(),
                    row.sample_id,
                    ans.start_char,
                    ans.end_char
                )));
            }
            let span = AnswerSpan::from_char_range(&tokens, ans.start_char, ans.end_char)
                .map_err(|e| {
                    Error::integrity(format!(
                        "{}: sample {}: {e}",
                        path.display(),
                        row.sample_id
                    ))
                })?;
            gold.push(span);
        }
        samples.push(MrcSample {
            sample_id: row.sample_id,
            question: row.question,
            passage: row.passage,
            gold,
        });
    }
    if samples.is_empty() {
        warnings.push(format!("{}: dataset is empty", path.display()));
    }
    Ok(Parsed { value: samples, warnings })
}

/// Write an MRC dataset as pretty-printed JSON (sample order preserved).
pub fn write_mrc_dataset(path: &Path, samples: &[MrcSample]) -> Result<()> {
    let rows: Vec<MrcSampleFile> = samples
        .iter()
        .map(|s| MrcSampleFile {
            sample_id: s.sample_id.clone(),
            question: s.question.clone(),
            passage: s.passage.clone(),
            answers: s
                .gold
                .iter()
                .map(|g| GoldSpanFile {
                    start_char: g.start_char,
                    end_char: g.end_char,
                    text: Some(g.text.clone()),
                })
                .collect(),
        })
        .collect();
    let mut body = serde_json::to_string_pretty(&rows).expect("dataset serialization is total");
    body.push('\n');
    std::fs::write(path, body).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

// ---------------------------------------------------------------------------
// Span runs (MRC predictions) JSON
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct SpanRunFile {
    sample_id: String,
    #[serde(default)]
    spans: Vec<ScoredSpanFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    no_answer_score: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoredSpanFile {
    start_char: usize,
    end_char: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    score: f64,
}

/// Parse a span run against its dataset (needed to resolve character offsets
/// to token spans over each sample's passage).
///
/// Every predicted sample id must exist in the dataset; dataset samples with
/// no prediction are allowed (evaluation treats them as empty predictions).
/// Lists are *not* truncated here — candidate files may legitimately be long;
/// evaluation and post-processing enforce the final cap.
pub fn parse_span_runs(path: &Path, dataset: &[MrcSample]) -> Result<Parsed<Vec<SpanRankedList>>> {
    let contents = read_file(path)?;
    let rows: Vec<SpanRunFile> = serde_json::from_str(&contents)
        .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    let by_id: BTreeMap<&str, &MrcSample> =
        dataset.iter().map(|s| (s.sample_id.as_str(), s)).collect();
    let mut warnings = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut lists = Vec::with_capacity(rows.len());
    for row in rows {
        if !seen.insert(row.sample_id.clone()) {
            return Err(Error::integrity(format!(
                "{}: duplicate sample id {}",
                path.display(),
                row.sample_id
            )));
        }
        let sample = by_id.get(row.sample_id.as_str()).ok_or_else(|| {
            Error::integrity(format!(
                "{}: predicted sample {} not present in the dataset",
                path.display(),
                row.sample_id
            ))
        })?;
        let tokens = sample.passage_tokens();
        let mut spans = Vec::with_capacity(row.spans.len());
        for s in &row.spans {
            if !s.score.is_finite() {
                return Err(Error::integrity(format!(
                    "{}: sample {}: non-finite span score",
                    path.display(),
                    row.sample_id
                )));
            }
            let answer =
                AnswerSpan::from_char_range(&tokens, s.start_char, s.end_char).map_err(|e| {
                    Error::integrity(format!(
                        "{}: sample {}: {e}",
                        path.display(),
                        row.sample_id
                    ))
                })?;
            spans.push(ScoredSpan { answer, score: s.score });
        }
        let list =
            SpanRankedList { sample_id: row.sample_id, spans, no_answer_score: row.no_answer_score };
        list.validate().map_err(|e| {
            Error::integrity(format!("{}: {e}", path.display()))
        })?;
        lists.push(list);
    }
    if lists.is_empty() {
        warnings.push(format!("{}: span run is empty", path.display()));
    }
    Ok(Parsed { value: lists, warnings })
}

/// Write a span run as pretty-printed JSON, samples sorted by id.
pub fn write_span_runs(path: &Path, lists: &[SpanRankedList]) -> Result<()> {
    let mut sorted: Vec<&SpanRankedList> = lists.iter().collect();
    sorted.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let rows: Vec<SpanRunFile> = sorted
        .iter()
        .map(|l| SpanRunFile {
            sample_id: l.sample_id.clone(),
            spans: l
                .spans
                .iter()
                .map(|s| ScoredSpanFile {
                    start_char: s.answer.start_char,
                    end_char: s.answer.end_char,
                    text: Some(s.answer.text.clone()),
                    score: s.score,
                })
                .collect(),
            no_answer_score: l.no_answer_score,
        })
        .collect();
    let mut body = serde_json::to_string_pretty(&rows).expect("span-run serialization is total");
    body.push('\n');
    std::fs::write(path, body).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

// ---------------------------------------------------------------------------
// Token logits (JSON lines)
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct LogitsFile {
    sample_id: String,
    start_logits: Vec<f64>,
    end_logits: Vec<f64>,
}

/// Parse a JSON-lines logits file (one object per line).
pub fn parse_logits(path: &Path) -> Result<Parsed<Vec<TokenLogits>>> {
    let contents = read_file(path)?;
    let mut seen = std::collections::BTreeSet::new();
    let mut all = Vec::new();
    let mut warnings = Vec::new();
    for (line_no, line) in lines(&contents) {
        let row: LogitsFile = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if !seen.insert(row.sample_id.clone()) {
            return Err(Error::parse(
                path,
                line_no,
                format!("duplicate sample id {}", row.sample_id),
            ));
        }
        let logits = TokenLogits::new(row.sample_id, row.start_logits, row.end_logits)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        all.push(logits);
    }
    if all.is_empty() {
        warnings.push(format!("{}: no logit records", path.display()));
    }
    Ok(Parsed { value: all, warnings })
}
