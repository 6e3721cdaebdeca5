//! Text canonicalization shared by every module that compares strings.
//!
//! The convention throughout the crate: a passage (or question, or answer) is
//! canonicalized by Unicode NFC normalization and then split on whitespace.
//! Token indices, token spans and "normalized text equality" all refer to the
//! result of that pipeline, so the rules live in one place.
//!
//! Character offsets in input files are interpreted over the NFC-normalized
//! text, counted in Unicode scalar values, with exclusive end offsets.

use unicode_normalization::UnicodeNormalization;

/// A token together with its character range in the normalized source text.
///
/// `start`/`end` are char offsets (not bytes); `end` is exclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffsetToken {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Apply Unicode NFC normalization.
pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

/// NFC-normalize and split on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    nfc(text).split_whitespace().map(str::to_string).collect()
}

/// NFC-normalize and split on whitespace, keeping each token's char range.
pub fn tokenize_with_offsets(text: &str) -> Vec<OffsetToken> {
    let normalized = nfc(text);
    let mut tokens = Vec::new();
    let mut current: Option<OffsetToken> = None;
    for (i, ch) in normalized.chars().enumerate() {
        if ch.is_whitespace() {
            if let Some(tok) = current.take() {
                tokens.push(tok);
            }
        } else {
            match current.as_mut() {
                Some(tok) => {
                    tok.text.push(ch);
                    tok.end = i + 1;
                }
                None => {
                    current = Some(OffsetToken { text: ch.to_string(), start: i, end: i + 1 });
                }
            }
        }
    }
    if let Some(tok) = current.take() {
        tokens.push(tok);
    }
    tokens
}

/// Canonical single-spaced form: NFC, whitespace collapsed to single spaces.
///
/// This is the string-equality key used when two texts must be compared as
/// "the same passage / question / answer".
pub fn canonical(text: &str) -> String {
    tokenize(text).join(" ")
}

/// Convert a character range (over the NFC-normalized text, end exclusive)
/// to the inclusive token span covering it.
///
/// Every token whose char range intersects `[start_char, end_char)` is
/// included. Returns `None` when the range covers no token (e.g. it points at
/// whitespace only or lies beyond the text).
pub fn char_range_to_token_span(
    tokens: &[OffsetToken],
    start_char: usize,
    end_char: usize,
) -> Option<(usize, usize)> {
    let mut first = None;
    let mut last = None;
    for (idx, tok) in tokens.iter().enumerate() {
        // Intersection of [tok.start, tok.end) and [start_char, end_char).
        if tok.start < end_char && start_char < tok.end {
            if first.is_none() {
                first = Some(idx);
            }
            last = Some(idx);
        }
    }
    match (first, last) {
        (Some(f), Some(l)) => Some((f, l)),
        _ => None,
    }
}

/// Render an inclusive token span back to its canonical text.
///
/// Panics if the span is out of bounds; callers validate spans at parse time.
pub fn render_span(tokens: &[OffsetToken], start_token: usize, end_token: usize) -> String {
    tokens[start_token..=end_token]
        .iter()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_collapses_whitespace() {
        assert_eq!(tokenize("  a\tbb \n c  "), vec!["a", "bb", "c"]);
        assert_eq!(tokenize(""), Vec::<String>::new());
        assert_eq!(tokenize("   "), Vec::<String>::new());
    }

    #[test]
    fn offsets_are_char_based_and_end_exclusive() {
        let toks = tokenize_with_offsets("ab  cde f");
        assert_eq!(toks.len(), 3);
        assert_eq!((toks[0].start, toks[0].end), (0, 2));
        assert_eq!((toks[1].start, toks[1].end), (4, 7));
        assert_eq!((toks[2].start, toks[2].end), (8, 9));
        assert_eq!(toks[1].text, "cde");
    }

    #[test]
    fn offsets_count_chars_not_bytes() {
        // Arabic letters are multi-byte in UTF-8 but single chars.
        let toks = tokenize_with_offsets("كتاب نور");
        assert_eq!((toks[0].start, toks[0].end), (0, 4));
        assert_eq!((toks[1].start, toks[1].end), (5, 8));
    }

    #[test]
    fn nfc_composes_decomposed_sequences() {
        // e + combining acute accent composes to é: 2 chars in, 1 char out.
        let decomposed = "e\u{0301}tat";
        assert_eq!(nfc(decomposed), "état");
        let toks = tokenize_with_offsets(decomposed);
        assert_eq!(toks[0].text, "état");
        assert_eq!((toks[0].start, toks[0].end), (0, 4));
    }

    #[test]
    fn covering_rule_includes_partially_overlapped_tokens() {
        let toks = tokenize_with_offsets("aa bb cc dd");
        // Range [4, 8) touches "bb" (chars 3..5) at char 4 and "cc" (6..8).
        assert_eq!(char_range_to_token_span(&toks, 4, 8), Some((1, 2)));
        // Exact single token.
        assert_eq!(char_range_to_token_span(&toks, 3, 5), Some((1, 1)));
        // Mid-token single char still covers the token.
        assert_eq!(char_range_to_token_span(&toks, 7, 8), Some((2, 2)));
    }

    #[test]
    fn covering_rule_rejects_whitespace_only_ranges() {
        let toks = tokenize_with_offsets("aa bb");
        assert_eq!(char_range_to_token_span(&toks, 2, 3), None);
        assert_eq!(char_range_to_token_span(&toks, 99, 120), None);
        assert_eq!(char_range_to_token_span(&toks, 3, 3), None); // empty range
    }

    #[test]
    fn render_joins_with_single_space() {
        let toks = tokenize_with_offsets("aa   bb\tcc");
        assert_eq!(render_span(&toks, 0, 2), "aa bb cc");
        assert_eq!(render_span(&toks, 1, 1), "bb");
    }

    #[test]
    fn canonical_equality_ignores_spacing_differences() {
        assert_eq!(canonical(" a  b "), canonical("a b"));
        assert_ne!(canonical("a b"), canonical("ab"));
    }
}
