//! Pulling the first JSON object out of free-form model output.
//!
//! Models asked for JSON often continue with commentary or code after the
//! object, so the output is never parsed whole. Instead the first `{` is
//! matched to its balancing `}` (skipping braces inside string literals) and
//! only that span is parsed.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Domain label the RAG model assigns to a question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerDomain {
    Finance,
    Sports,
    Music,
    Movie,
    Encyclopedia,
    Other,
}

impl AnswerDomain {
    pub const ALL: [AnswerDomain; 6] = [
        AnswerDomain::Finance,
        AnswerDomain::Sports,
        AnswerDomain::Music,
        AnswerDomain::Movie,
        AnswerDomain::Encyclopedia,
        AnswerDomain::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AnswerDomain::Finance => "finance",
            AnswerDomain::Sports => "sports",
            AnswerDomain::Music => "music",
            AnswerDomain::Movie => "movie",
            AnswerDomain::Encyclopedia => "encyclopedia",
            AnswerDomain::Other => "other",
        }
    }

    /// Case-insensitive lookup; anything unrecognized is `Other`.
    pub fn from_label(label: &str) -> Self {
        let label = label.trim().to_lowercase();
        Self::ALL.into_iter().find(|d| d.as_str() == label).unwrap_or_else(|| {
            tracing::warn!(domain = %label, "unknown domain label, using \"other\"");
            AnswerDomain::Other
        })
    }
}

impl fmt::Display for AnswerDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredAnswer {
    pub domain: AnswerDomain,
    pub answer: String,
}

/// Every variant is a "JSON processing error" for routing purposes.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum ExtractError {
    #[error("no balanced JSON object found")]
    NoObjectFound,
    #[error("first object is not valid JSON: {0}")]
    ParseFailure(String),
    #[error("object lacks a usable \"{0}\" field")]
    SchemaFailure(String),
}

/// Byte range of the first balanced `{...}` span, starting at the first `{`
/// in `raw`. String literals and backslash escapes inside them are honored.
pub fn first_object_span(raw: &str) -> Option<(usize, usize)> {
    let start = raw.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in raw[start..].char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some((start, start + i + 1));
                }
            }
            _ => {}
        }
    }
    None
}

pub fn extract_first_json(raw: &str) -> Result<StructuredAnswer, ExtractError> {
    let (start, end) = first_object_span(raw).ok_or(ExtractError::NoObjectFound)?;
    let value: Value = serde_json::from_str(&raw[start..end]).map_err(|e| ExtractError::ParseFailure(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(ExtractError::ParseFailure("not an object".into()));
    };
    let domain = match obj.get("domain") {
        Some(Value::String(s)) => AnswerDomain::from_label(s),
        _ => return Err(ExtractError::SchemaFailure("domain".into())),
    };
    let answer = match obj.get("answer") {
        Some(Value::String(s)) => s.trim().to_lowercase(),
        Some(v @ (Value::Number(_) | Value::Bool(_))) => v.to_string(),
        _ => return Err(ExtractError::SchemaFailure("answer".into())),
    };
    if answer.is_empty() {
        return Err(ExtractError::SchemaFailure("answer".into()));
    }
    Ok(StructuredAnswer { domain, answer })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerClass {
    InvalidQuestion,
    IDontKnow,
    Substantive,
}

/// Canonical form used for answer classification: lowercase, single
/// spaces, typographic apostrophes folded to `'`, trailing periods removed.
pub fn canonical_answer(ans: &str) -> String {
    let folded: String = ans
        .chars()
        .map(|c| match c {
            '\u{2019}' | '\u{2018}' | '\u{02bc}' => '\'',
            c => c,
        })
        .collect();
    folded
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
        .trim_end_matches(|c: char| c == '.' || c.is_whitespace())
        .to_string()
}

pub fn classify_answer(ans: &str) -> AnswerClass {
    match canonical_answer(ans).as_str() {
        "invalid question" => AnswerClass::InvalidQuestion,
        "i don't know" => AnswerClass::IDontKnow,
        _ => AnswerClass::Substantive,
    }
}
