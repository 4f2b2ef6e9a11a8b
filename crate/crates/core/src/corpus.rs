//! Question fixtures and sentence segmentation of retrieved pages.
//!
//! A fixture file holds one JSON object per line. Each object carries the
//! question, its normalized ground truth, CRAG-style labels and the mock
//! web-search results that the pruner later ranks sentence by sentence.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::text::normalize_answer;

/// Abbreviations whose trailing period never ends a sentence.
pub const ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");

/// Keys every fixture line must carry, in schema order.
pub const FIXTURE_KEYS: [&str; 8] = [
    "interaction_id",
    "query",
    "answer",
    "alt_answers",
    "question_type",
    "domain",
    "timeliness",
    "search_results",
];

const RESULT_KEYS: [&str; 4] = ["page_name", "page_url", "page_snippet", "page_result"];

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($label => Ok($name::$variant),)+
                    other => Err(other.to_string()),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(d)?;
                raw.parse()
                    .map_err(|v| serde::de::Error::custom(format!("unknown {} {v:?}", stringify!($name))))
            }
        }
    };
}

label_enum!(
    /// CRAG question type.
    QuestionType {
        Simple => "simple",
        SimpleWithCondition => "simple_w_condition",
        Comparison => "comparison",
        Aggregation => "aggregation",
        Set => "set",
        FalsePremise => "false_premise",
        PostProcessing => "post_processing",
        MultiHop => "multi_hop",
    }
);

label_enum!(
    /// Benchmark domain a question is filed under.
    Domain {
        Finance => "finance",
        Sports => "sports",
        Music => "music",
        Movie => "movie",
        Open => "open",
    }
);

label_enum!(
    /// How quickly the answer to a question changes.
    Timeliness {
        RealTime => "real_time",
        FastChanging => "fast_changing",
        SlowChanging => "slow_changing",
        Stable => "stable",
    }
);

/// One mock web-search hit attached to a question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub page_name: String,
    pub page_url: String,
    pub page_snippet: String,
    #[serde(default)]
    pub page_result: String,
}

impl SearchResult {
    /// Text the segmenter works on: the full page when present, else the snippet.
    pub fn body(&self) -> &str {
        if self.page_result.trim().is_empty() {
            &self.page_snippet
        } else {
            &self.page_result
        }
    }
}

/// One benchmark question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub interaction_id: String,
    pub query: String,
    pub answer: String,
    #[serde(default)]
    pub alt_answers: Vec<String>,
    pub question_type: QuestionType,
    pub domain: Domain,
    pub timeliness: Timeliness,
    #[serde(default)]
    pub search_results: Vec<SearchResult>,
}

impl QueryRecord {
    /// Serialize as one fixture line (no trailing newline).
    pub fn to_fixture_line(&self) -> String {
        serde_json::to_string(self).expect("QueryRecord serializes")
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: missing field \"{name}\"")]
    MissingField { line: usize, name: String },
    #[error("line {line}: unknown value {value:?} for field \"{field}\"")]
    UnknownEnumValue { line: usize, field: String, value: String },
    #[error("line {line}: unknown key \"{key}\"")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate interaction_id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: {reason}")]
    InvalidRecord { line: usize, reason: String },
}

impl CorpusError {
    /// 1-based line number the error points at, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            CorpusError::Io { .. } => None,
            CorpusError::MalformedLine { line, .. }
            | CorpusError::MissingField { line, .. }
            | CorpusError::UnknownEnumValue { line, .. }
            | CorpusError::UnknownKey { line, .. }
            | CorpusError::DuplicateId { line, .. }
            | CorpusError::InvalidRecord { line, .. } => Some(*line),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Reject unknown keys instead of warning about them.
    pub strict: bool,
}

/// Load a fixture file with default (lenient) options.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<QueryRecord>, CorpusError> {
    load_dataset_with(path, LoadOptions::default())
}

pub fn load_dataset_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Vec<QueryRecord>, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text, opts)
}

/// Parse fixture text. Blank lines are skipped; line numbers stay 1-based
/// relative to the input.
pub fn parse_dataset(text: &str, opts: LoadOptions) -> Result<Vec<QueryRecord>, CorpusError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record = parse_line(raw, line, opts)?;
        if !seen.insert(record.interaction_id.clone()) {
            return Err(CorpusError::DuplicateId {
                line,
                id: record.interaction_id,
            });
        }
        records.push(record);
    }
    Ok(records)
}

fn parse_line(raw: &str, line: usize, opts: LoadOptions) -> Result<QueryRecord, CorpusError> {
    let value: Value = serde_json::from_str(raw).map_err(|e| CorpusError::MalformedLine {
        line,
        reason: e.to_string(),
    })?;
    let Value::Object(obj) = value else {
        return Err(CorpusError::MalformedLine {
            line,
            reason: "expected a JSON object".into(),
        });
    };
    check_keys(&obj, &FIXTURE_KEYS, line, opts, "")?;

    let interaction_id = string_field(&obj, "interaction_id", line)?;
    let query = string_field(&obj, "query", line)?;
    let answer = normalize_answer(&string_field(&obj, "answer", line)?);
    let alt_answers = match obj.get("alt_answers") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => Ok(normalize_answer(s)),
                other => Err(malformed(line, format!("alt_answers entry {other} is not a string"))),
            })
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(malformed(line, "alt_answers must be an array".into())),
    };
    let question_type = enum_field::<QuestionType>(&obj, "question_type", line)?;
    let domain = enum_field::<Domain>(&obj, "domain", line)?;
    let timeliness = enum_field::<Timeliness>(&obj, "timeliness", line)?;

    let search_results = match obj.get("search_results") {
        None => return Err(missing(line, "search_results")),
        Some(Value::Array(items)) => items
            .iter()
            .map(|item| parse_result(item, line, opts))
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(malformed(line, "search_results must be an array".into())),
    };

    if interaction_id.trim().is_empty() {
        return Err(invalid(line, "interaction_id is empty"));
    }
    if query.trim().is_empty() {
        return Err(invalid(line, "query is empty"));
    }
    if answer.is_empty() {
        return Err(invalid(line, "answer is empty"));
    }
    if question_type == QuestionType::FalsePremise && answer != "invalid question" {
        return Err(invalid(
            line,
            "false_premise record must have answer \"invalid question\"",
        ));
    }

    Ok(QueryRecord {
        interaction_id,
        query,
        answer,
        alt_answers,
        question_type,
        domain,
        timeliness,
        search_results,
    })
}

fn parse_result(item: &Value, line: usize, opts: LoadOptions) -> Result<SearchResult, CorpusError> {
    let Value::Object(obj) = item else {
        return Err(malformed(line, "search result must be an object".into()));
    };
    check_keys(obj, &RESULT_KEYS, line, opts, "search_results.")?;
    let page_url = string_field(obj, "page_url", line)?;
    if page_url.trim().is_empty() {
        return Err(invalid(line, "search result page_url is empty"));
    }
    Ok(SearchResult {
        page_name: string_field(obj, "page_name", line)?,
        page_url,
        page_snippet: string_field(obj, "page_snippet", line)?,
        page_result: match obj.get("page_result") {
            None | Some(Value::Null) => String::new(),
            Some(Value::String(s)) => s.clone(),
            Some(_) => return Err(malformed(line, "page_result must be a string".into())),
        },
    })
}

fn check_keys(
    obj: &Map<String, Value>,
    known: &[&str],
    line: usize,
    opts: LoadOptions,
    prefix: &str,
) -> Result<(), CorpusError> {
    for key in obj.keys().filter(|k| !known.contains(&k.as_str())) {
        if opts.strict {
            return Err(CorpusError::UnknownKey {
                line,
                key: format!("{prefix}{key}"),
            });
        }
        tracing::warn!(line, key = %format!("{prefix}{key}"), "ignoring unknown fixture key");
    }
    Ok(())
}

fn string_field(obj: &Map<String, Value>, name: &str, line: usize) -> Result<String, CorpusError> {
    match obj.get(name) {
        None | Some(Value::Null) => Err(missing(line, name)),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(other) => Err(malformed(
            line,
            format!("field \"{name}\" must be a string, got {other}"),
        )),
    }
}

fn enum_field<T: FromStr<Err = String>>(obj: &Map<String, Value>, name: &str, line: usize) -> Result<T, CorpusError> {
    let raw = string_field(obj, name, line)?;
    raw.parse().map_err(|value| CorpusError::UnknownEnumValue {
        line,
        field: name.to_string(),
        value,
    })
}

fn missing(line: usize, name: &str) -> CorpusError {
    CorpusError::MissingField {
        line,
        name: name.to_string(),
    }
}

fn malformed(line: usize, reason: String) -> CorpusError {
    CorpusError::MalformedLine { line, reason }
}

fn invalid(line: usize, reason: &str) -> CorpusError {
    CorpusError::InvalidRecord {
        line,
        reason: reason.to_string(),
    }
}

/// A sentence addressed by document, paragraph and position in paragraph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentenceUnit {
    pub doc_index: usize,
    pub para_index: usize,
    pub sent_index: usize,
    pub text: String,
}

impl SentenceUnit {
    /// Corpus-order key.
    pub fn key(&self) -> (usize, usize, usize) {
        (self.doc_index, self.para_index, self.sent_index)
    }
}

fn guard_list() -> &'static HashSet<&'static str> {
    static GUARD: OnceLock<HashSet<&'static str>> = OnceLock::new();
    GUARD.get_or_init(|| {
        ABBREVIATIONS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

/// Segment one search result into sentences. Uses the full page text when
/// present, otherwise the snippet.
pub fn segment(doc: &SearchResult, doc_index: usize) -> Vec<SentenceUnit> {
    segment_text(doc.body(), doc_index)
}

/// Segment every result of a question, numbering documents by position.
pub fn segment_results(results: &[SearchResult]) -> Vec<SentenceUnit> {
    results.iter().enumerate().flat_map(|(i, r)| segment(r, i)).collect()
}

/// Split text into blank-line-delimited paragraphs, then into sentences.
pub fn segment_text(text: &str, doc_index: usize) -> Vec<SentenceUnit> {
    paragraphs(text)
        .into_iter()
        .enumerate()
        .flat_map(|(para_index, para)| {
            split_sentences(&para)
                .into_iter()
                .enumerate()
                .map(move |(sent_index, text)| SentenceUnit {
                    doc_index,
                    para_index,
                    sent_index,
                    text,
                })
        })
        .collect()
}

fn paragraphs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                out.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        out.push(current.join("\n"));
    }
    out
}

/// Split one paragraph on `.`, `!` or `?` followed by whitespace, unless the
/// word carrying the period is in the abbreviation guard list.
pub fn split_sentences(para: &str) -> Vec<String> {
    let guard = guard_list();
    let mut out = Vec::new();
    let mut start = 0;
    let mut iter = para.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let next_is_space = iter.peek().is_some_and(|&(_, n)| n.is_whitespace());
        if !next_is_space {
            continue;
        }
        let end = i + c.len_utf8();
        if c == '.' {
            let word_start = para[start..i]
                .rfind(char::is_whitespace)
                .map_or(start, |p| start + p + 1);
            let word = para[word_start..end]
                .trim_start_matches(['(', '[', '"', '\'', '“', '‘'])
                .to_lowercase();
            if guard.contains(word.as_str()) {
                continue;
            }
        }
        push_trimmed(&mut out, &para[start..end]);
        start = end;
    }
    push_trimmed(&mut out, &para[start..]);
    out
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece.to_string());
    }
}
