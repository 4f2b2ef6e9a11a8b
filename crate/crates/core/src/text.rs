//! Answer-string normalization shared by loading, extraction and scoring.

const TRAILING_PUNCT: &[char] = &['.', ',', '!', '?', ';', ':'];

/// Lowercase, collapse internal whitespace to single spaces and strip
/// trailing punctuation.
///
/// Idempotent: `normalize_answer(&normalize_answer(s)) == normalize_answer(s)`.
pub fn normalize_answer(raw: &str) -> String {
    let collapsed = raw
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ");
    collapsed
        .trim_end_matches(|c: char| TRAILING_PUNCT.contains(&c) || c.is_whitespace())
        .to_string()
}

/// Split a normalized answer into content tokens: whitespace separated,
/// with leading/trailing punctuation removed from each token.
pub(crate) fn answer_tokens(normalized: &str) -> Vec<&str> {
    normalized
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .collect()
}
