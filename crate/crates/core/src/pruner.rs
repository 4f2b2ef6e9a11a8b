//! Sentence-level context pruning.
//!
//! Every retrieved sentence is scored by cosine similarity against the
//! question. The `top_k` best are kept, those under `threshold_n` are dropped,
//! and each surviving seed pulls in up to `expand_m` following sentences of
//! its own paragraph. The result is rendered in corpus order with a `<DOC>`
//! marker at each document boundary.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SentenceUnit;
use crate::embedding::{cosine_similarity, EmbeddingError, EmbeddingProvider, EmbeddingVector};

pub const DOC_MARKER: &str = "<DOC> ";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrunerConfig {
    pub top_k: usize,
    pub expand_m: usize,
    pub threshold_n: f64,
    pub max_context_chars: usize,
}

impl Default for PrunerConfig {
    fn default() -> Self {
        Self {
            top_k: 10,
            expand_m: 2,
            threshold_n: 0.75,
            max_context_chars: 4000,
        }
    }
}

impl PrunerConfig {
    pub fn validate(&self) -> Result<(), PruneError> {
        if self.top_k == 0 {
            return Err(PruneError::InvalidConfig("top_k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold_n) {
            return Err(PruneError::InvalidConfig(format!(
                "threshold_n must be in [0, 1], got {}",
                self.threshold_n
            )));
        }
        if self.max_context_chars == 0 {
            return Err(PruneError::InvalidConfig("max_context_chars must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PruneError {
    #[error("invalid pruner config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Provider(#[from] EmbeddingError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredSentence {
    pub unit: SentenceUnit,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrunedContext {
    /// Seeds that passed the threshold, best first.
    pub selected: Vec<ScoredSentence>,
    /// Seeds plus their expansions, deduplicated, in corpus order. This is
    /// the set before truncation to `max_context_chars`.
    pub units: Vec<SentenceUnit>,
    pub expanded_text: String,
    pub seeds_passing_threshold: usize,
}

impl PrunedContext {
    pub fn empty() -> Self {
        Self {
            selected: Vec::new(),
            units: Vec::new(),
            expanded_text: String::new(),
            seeds_passing_threshold: 0,
        }
    }
}

/// Descending similarity, then ascending corpus position.
pub fn rank_order(a: &ScoredSentence, b: &ScoredSentence) -> Ordering {
    b.similarity
        .total_cmp(&a.similarity)
        .then_with(|| a.unit.key().cmp(&b.unit.key()))
}

/// Similarity used for ranking. A sentence or query without any embeddable
/// content has no direction and scores 0.
fn similarity(query: &EmbeddingVector, sentence: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    match cosine_similarity(query, sentence) {
        Err(EmbeddingError::ZeroVector) => Ok(0.0),
        other => other,
    }
}

/// Score every sentence against the query. Output is in input order.
pub fn score_sentences(
    query: &str,
    sentences: &[SentenceUnit],
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<ScoredSentence>, PruneError> {
    if sentences.is_empty() {
        return Ok(Vec::new());
    }
    let q = provider.embed(query)?;
    sentences
        .iter()
        .map(|unit| {
            let e = provider.embed(&unit.text)?;
            Ok(ScoredSentence {
                unit: unit.clone(),
                similarity: similarity(&q, &e)?,
            })
        })
        .collect()
}

pub fn prune(
    query: &str,
    sentences: &[SentenceUnit],
    provider: &dyn EmbeddingProvider,
    cfg: &PrunerConfig,
) -> Result<PrunedContext, PruneError> {
    cfg.validate()?;
    let scored = score_sentences(query, sentences, provider)?;
    Ok(prune_scored(scored, sentences, cfg))
}

/// Selection, expansion and rendering over precomputed similarities.
pub fn prune_scored(mut scored: Vec<ScoredSentence>, sentences: &[SentenceUnit], cfg: &PrunerConfig) -> PrunedContext {
    scored.sort_by(rank_order);
    scored.truncate(cfg.top_k);
    scored.retain(|s| s.similarity >= cfg.threshold_n);
    let seeds = scored;

    // sentence positions per paragraph, ascending
    let mut paragraphs: BTreeMap<(usize, usize), Vec<&SentenceUnit>> = BTreeMap::new();
    for unit in sentences {
        paragraphs
            .entry((unit.doc_index, unit.para_index))
            .or_default()
            .push(unit);
    }
    for members in paragraphs.values_mut() {
        members.sort_by_key(|u| u.sent_index);
    }

    let mut chosen: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    for seed in &seeds {
        let key = seed.unit.key();
        chosen.insert(key);
        let members = &paragraphs[&(key.0, key.1)];
        if let Some(pos) = members.iter().position(|u| u.sent_index == key.2) {
            for follower in members.iter().skip(pos + 1).take(cfg.expand_m) {
                chosen.insert(follower.key());
            }
        }
    }

    let by_key: BTreeMap<_, _> = sentences.iter().map(|u| (u.key(), u)).collect();
    let units: Vec<SentenceUnit> = chosen.iter().map(|k| by_key[k].clone()).collect();
    let expanded_text = render_context(&units, cfg.max_context_chars);

    PrunedContext {
        seeds_passing_threshold: seeds.len(),
        selected: seeds,
        units,
        expanded_text,
    }
}

/// Join units (already in corpus order) into one context string. Sentences
/// of one document are space separated; each document starts on a new line
/// with the `<DOC>` marker. Output stops before the first sentence that
/// would push it past `max_chars` characters; if not even the first one
/// fits, a prefix of it is emitted.
pub fn render_context(units: &[SentenceUnit], max_chars: usize) -> String {
    let mut out = String::new();
    let mut out_chars = 0;
    let mut last_doc = None;
    for unit in units {
        let sep = match last_doc {
            None => DOC_MARKER.to_string(),
            Some(d) if d != unit.doc_index => format!("\n{DOC_MARKER}"),
            Some(_) => " ".to_string(),
        };
        let piece_chars = sep.chars().count() + unit.text.chars().count();
        if out_chars + piece_chars > max_chars {
            if out.is_empty() {
                out = sep.chars().chain(unit.text.chars()).take(max_chars).collect();
            }
            break;
        }
        out.push_str(&sep);
        out.push_str(&unit.text);
        out_chars += piece_chars;
        last_doc = Some(unit.doc_index);
    }
    out
}

/// Whether the context is good enough to answer from: at least one seed
/// cleared the similarity threshold.
pub fn gate(ctx: &PrunedContext) -> bool {
    ctx.seeds_passing_threshold >= 1
}
