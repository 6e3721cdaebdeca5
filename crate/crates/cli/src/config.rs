//! Optional JSON configuration file.
//!
//! A flat object of tuning knobs that subcommands fall back to when the
//! matching flag is absent; an explicit flag always wins. Input and output
//! *paths* are flags only — they name the work, not how to do it.

use std::path::Path;

use rankqa_core::{Error, Result};
use serde::Deserialize;

use crate::report::OutputFormat;
use crate::TuneMode;

/// Knobs accepted from `--config <FILE>`. Unknown keys are rejected so a
/// typo cannot silently fall back to a default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Report format (`json`, `text`, `csv`).
    pub format: Option<OutputFormat>,
    /// Worker threads (0 = automatic).
    pub threads: Option<usize>,
    /// Threshold-selection strategy (`search`, `quantile`, `fixed`).
    pub mode: Option<TuneMode>,
    /// Fixed unanswerability threshold ζ on the normalized [0, 1] scale.
    pub zeta: Option<f64>,
    /// Fraction of items to mark for quantile thresholding.
    pub fraction: Option<f64>,
    /// Recall cutoffs for retrieval evaluation.
    pub recall_k: Option<Vec<usize>>,
    /// BM25 term-frequency saturation parameter.
    pub k1: Option<f64>,
    /// BM25 length-normalization parameter.
    pub b: Option<f64>,
    /// Ranked-list depth for lexical search.
    pub k: Option<usize>,
    /// Longest decodable answer span, in tokens.
    pub max_span_len: Option<usize>,
    /// Number of candidate spans decoded per sample.
    pub n_best: Option<usize>,
    /// Token-F1 overlap above which a lower-scored span is suppressed.
    pub overlap_threshold: Option<f64>,
    /// Minimum kept span length, in tokens.
    pub min_token_len: Option<usize>,
    /// Maximum spans kept per sample after suppression.
    pub max_answers: Option<usize>,
    /// Zero-answer share the dev split should reach.
    pub zero_ratio: Option<f64>,
    /// Run tag written into produced run files.
    pub tag: Option<String>,
}

impl FileConfig {
    /// Load the config file if one was named; absent file path means
    /// an empty config (all fall-backs stay at their built-in defaults).
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let contents = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&contents).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }
}
