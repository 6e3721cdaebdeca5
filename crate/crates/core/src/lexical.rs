//! Lexical retrieval baselines: an Arabic-aware analyzer, an inverted
//! index, Okapi BM25, and cosine TF-IDF.
//!
//! The analyzer bridges the surface gap between modern-standard-Arabic
//! questions and classical-Arabic passages: diacritics and tatweel are
//! stripped, common letter variants are folded (alef forms → bare alef,
//! teh marbuta → heh, alef maqsura → yeh), Latin is lowercased, and tokens
//! break on any non-alphanumeric character.

use rayon::prelude::*;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::model::{PassageCollection, Question, RetrievalRun, RunPrediction, ScoredPassage, MAX_RANKS};

/// Okapi BM25 parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    /// Term-frequency saturation (k1 ≥ 0).
    pub k1: f64,
    /// Length normalization strength (0 ≤ b ≤ 1).
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    fn validate(&self) -> Result<()> {
        if !self.k1.is_finite() || self.k1 < 0.0 {
            return Err(Error::contract(format!("BM25 k1 must be finite and >= 0, got {}", self.k1)));
        }
        if !self.b.is_finite() || !(0.0..=1.0).contains(&self.b) {
            return Err(Error::contract(format!("BM25 b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// Arabic combining marks removed before matching: honorific signs
/// (U+0610–U+061A), tashkeel and recitation marks (U+064B–U+065F),
/// superscript alef (U+0670), and the small high/low annotation ranges
/// (U+06D6–U+06DC, U+06DF–U+06E4, U+06E7–U+06E8, U+06EA–U+06ED).
fn is_stripped_mark(c: char) -> bool {
    matches!(c,
        '\u{0610}'..='\u{061A}'
        | '\u{064B}'..='\u{065F}'
        | '\u{0670}'
        | '\u{06D6}'..='\u{06DC}'
        | '\u{06DF}'..='\u{06E4}'
        | '\u{06E7}'..='\u{06E8}'
        | '\u{06EA}'..='\u{06ED}'
        | '\u{0640}' // tatweel
    )
}

/// Fold Arabic letter variants that differ between classical orthography
/// and everyday writing.
fn fold_char(c: char) -> char {
    match c {
        // alef with hamza above/below, madda, wasla → bare alef
        '\u{0623}' | '\u{0625}' | '\u{0622}' | '\u{0671}' => '\u{0627}',
        // teh marbuta → heh
        '\u{0629}' => '\u{0647}',
        // alef maqsura → yeh
        '\u{0649}' => '\u{064A}',
        other => other,
    }
}

/// Analyze text into matching tokens: NFC, strip marks, fold variants,
/// lowercase, split on non-alphanumeric boundaries.
pub fn normalize_text(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.nfc() {
        if is_stripped_mark(c) {
            continue;
        }
        let folded = fold_char(c);
        if folded.is_alphanumeric() {
            for lower in folded.to_lowercase() {
                current.push(lower);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Posting {
    doc: usize,
    tf: usize,
}

/// Inverted index over an analyzed passage collection.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    postings: std::collections::BTreeMap<String, Vec<Posting>>,
    doc_ids: Vec<String>,
    doc_len: Vec<usize>,
    avg_doc_len: f64,
    /// Euclidean norm of each document's tf·idf vector (0 for empty docs).
    tfidf_norm: Vec<f64>,
}

impl InvertedIndex {
    /// Build the index; deterministic for a given collection.
    pub fn build(collection: &PassageCollection) -> InvertedIndex {
        let mut postings: std::collections::BTreeMap<String, Vec<Posting>> =
            std::collections::BTreeMap::new();
        let mut doc_ids = Vec::with_capacity(collection.len());
        let mut doc_len = Vec::with_capacity(collection.len());
        for (doc, passage) in collection.iter().enumerate() {
            let tokens = normalize_text(&passage.text);
            doc_len.push(tokens.len());
            doc_ids.push(passage.id.clone());
            let mut counts: std::collections::BTreeMap<String, usize> =
                std::collections::BTreeMap::new();
            for token in tokens {
                *counts.entry(token).or_insert(0) += 1;
            }
            for (token, tf) in counts {
                postings.entry(token).or_default().push(Posting { doc, tf });
            }
        }
        let total: usize = doc_len.iter().sum();
        let avg_doc_len =
            if doc_len.is_empty() || total == 0 { 0.0 } else { total as f64 / doc_len.len() as f64 };

        // Per-document tf·idf norms for cosine scoring.
        let n = doc_ids.len() as f64;
        let mut norm_sq = vec![0.0f64; doc_ids.len()];
        for plist in postings.values() {
            let idf = (n / plist.len() as f64).ln();
            for posting in plist {
                let w = posting.tf as f64 * idf;
                norm_sq[posting.doc] += w * w;
            }
        }
        let tfidf_norm = norm_sq.into_iter().map(f64::sqrt).collect();

        InvertedIndex { postings, doc_ids, doc_len, avg_doc_len, tfidf_norm }
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn n_terms(&self) -> usize {
        self.postings.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    /// Document frequency of an already-analyzed term.
    pub fn doc_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    fn check_searchable(&self, k: usize) -> Result<()> {
        if self.n_docs() == 0 {
            return Err(Error::contract("search over an empty index"));
        }
        if k == 0 {
            return Err(Error::contract("search with k = 0"));
        }
        Ok(())
    }

    /// Collect positive-score documents sorted by score (descending),
    /// breaking ties by passage id, truncated to k.
    fn top_k(&self, scores: Vec<f64>, k: usize) -> Vec<ScoredPassage> {
        let mut scored: Vec<(f64, &str)> = scores
            .into_iter()
            .enumerate()
            .filter(|(_, s)| *s > 0.0)
            .map(|(doc, s)| (s, self.doc_ids[doc].as_str()))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
        scored.truncate(k);
        scored
            .into_iter()
            .map(|(score, pid)| ScoredPassage { passage_id: pid.to_string(), score })
            .collect()
    }
}

/// Okapi BM25: idf(t) = max(0, ln((N − df + ½)/(df + ½))), term weight
/// tf·(k1+1)/(tf + k1·(1 − b + b·dl/avgdl)). Repeated query tokens
/// contribute once per occurrence. Only positive-score documents are
/// returned — an all-zero query yields an empty result.
pub fn bm25_search(
    index: &InvertedIndex,
    query: &str,
    k: usize,
    params: &Bm25Params,
) -> Result<Vec<ScoredPassage>> {
    index.check_searchable(k)?;
    params.validate()?;
    let n = index.n_docs() as f64;
    let mut scores = vec![0.0f64; index.n_docs()];
    for token in normalize_text(query) {
        let Some(plist) = index.postings.get(&token) else { continue };
        let df = plist.len() as f64;
        let idf = ((n - df + 0.5) / (df + 0.5)).ln().max(0.0);
        if idf == 0.0 {
            continue;
        }
        for posting in plist {
            let tf = posting.tf as f64;
            let dl = index.doc_len[posting.doc] as f64;
            let denom = tf + params.k1 * (1.0 - params.b + params.b * dl / index.avg_doc_len);
            scores[posting.doc] += idf * tf * (params.k1 + 1.0) / denom;
        }
    }
    Ok(index.top_k(scores, k))
}

/// Cosine similarity between tf·idf vectors, idf(t) = ln(N/df).
pub fn tfidf_search(index: &InvertedIndex, query: &str, k: usize) -> Result<Vec<ScoredPassage>> {
    index.check_searchable(k)?;
    let n = index.n_docs() as f64;

    // Query term frequencies.
    let mut query_tf: std::collections::BTreeMap<String, usize> = std::collections::BTreeMap::new();
    for token in normalize_text(query) {
        *query_tf.entry(token).or_insert(0) += 1;
    }

    let mut dot = vec![0.0f64; index.n_docs()];
    let mut query_norm_sq = 0.0f64;
    for (token, qtf) in &query_tf {
        let Some(plist) = index.postings.get(token) else { continue };
        let idf = (n / plist.len() as f64).ln();
        let qw = *qtf as f64 * idf;
        query_norm_sq += qw * qw;
        for posting in plist {
            dot[posting.doc] += qw * posting.tf as f64 * idf;
        }
    }
    if query_norm_sq == 0.0 {
        return Ok(Vec::new());
    }
    let query_norm = query_norm_sq.sqrt();
    let scores = dot
        .into_iter()
        .enumerate()
        .map(|(doc, d)| {
            if d > 0.0 && index.tfidf_norm[doc] > 0.0 {
                d / (query_norm * index.tfidf_norm[doc])
            } else {
                0.0
            }
        })
        .collect();
    Ok(index.top_k(scores, k))
}

/// Which lexical scorer a batch run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexicalScorer {
    Bm25,
    Tfidf,
}

/// Score every question against the index, producing a retrieval run.
/// `k` is capped at [`MAX_RANKS`], the maximum run-list length; questions
/// with no positive-score document get an empty ranked list.
pub fn lexical_run(
    index: &InvertedIndex,
    questions: &[Question],
    scorer: LexicalScorer,
    params: &Bm25Params,
    k: usize,
    tag: &str,
) -> Result<RetrievalRun> {
    let k = k.min(MAX_RANKS);
    let results: Vec<(String, Result<Vec<ScoredPassage>>)> = questions
        .par_iter()
        .map(|q| {
            let hits = match scorer {
                LexicalScorer::Bm25 => bm25_search(index, &q.text, k, params),
                LexicalScorer::Tfidf => tfidf_search(index, &q.text, k),
            };
            (q.id.clone(), hits)
        })
        .collect();
    let mut run = RetrievalRun::new(tag);
    for (qid, hits) in results {
        run.insert(&qid, RunPrediction::Ranked(hits?))?;
    }
    Ok(run)
}
