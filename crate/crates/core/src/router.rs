//! Hybrid answer routing.
//!
//! The RAG model answers first, with pruned search results as references,
//! and labels the question's domain. Only a valid answer labelled `movie`
//! is kept. Everything else, including answers the model marks as
//! "invalid question" and outputs that do not yield a JSON answer, goes to
//! the fine-tuned model, which is trained to abstain when unsure. When the
//! pruner finds no sentence above the similarity threshold, the RAG model
//! is skipped entirely.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{segment_results, QueryRecord};
use crate::embedding::EmbeddingProvider;
use crate::gateway::{
    ask_finetuned, ask_rag, classify_answer, AnswerClass, AnswerDomain, BackendError, ChatBackend, DecodeParams,
    ModelExchange,
};
use crate::pruner::{gate, prune, PruneError, PrunedContext, PrunerConfig};
use crate::text::normalize_answer;

pub const I_DONT_KNOW: &str = "i don't know";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    RagMovieAccepted,
    FallbackFinetuned,
    FallbackNoContext,
}

impl Branch {
    pub const ALL: [Branch; 3] = [
        Branch::RagMovieAccepted,
        Branch::FallbackFinetuned,
        Branch::FallbackNoContext,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::RagMovieAccepted => "rag_movie_accepted",
            Branch::FallbackFinetuned => "fallback_finetuned",
            Branch::FallbackNoContext => "fallback_no_context",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether the RAG model is consulted at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouterMode {
    #[default]
    Hybrid,
    /// Every question goes straight to the fine-tuned model.
    FinetunedOnly,
}

#[derive(Debug, Error)]
pub enum RouteError {
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoutingOutcome {
    pub interaction_id: String,
    pub final_answer: String,
    pub branch: Branch,
    pub rag_exchange: Option<ModelExchange>,
    pub finetuned_exchange: Option<ModelExchange>,
    pub pruned: Option<PrunedContext>,
    /// Set when the question failed and the answer is a forced abstention.
    pub error: Option<String>,
}

impl RoutingOutcome {
    /// Abstaining outcome for a question whose processing failed.
    pub fn failed(interaction_id: &str, err: &RouteError) -> Self {
        Self {
            interaction_id: interaction_id.to_string(),
            final_answer: I_DONT_KNOW.to_string(),
            branch: Branch::FallbackNoContext,
            rag_exchange: None,
            finetuned_exchange: None,
            pruned: None,
            error: Some(err.to_string()),
        }
    }

    pub fn rag_domain(&self) -> Option<AnswerDomain> {
        self.rag_exchange.as_ref().and_then(|e| e.parsed()).map(|p| p.domain)
    }

    pub fn to_record(&self) -> OutcomeRecord {
        OutcomeRecord {
            interaction_id: self.interaction_id.clone(),
            final_answer: self.final_answer.clone(),
            branch: self.branch,
            rag_domain: self.rag_domain(),
            rag_raw_len: self.rag_exchange.as_ref().map(|e| e.raw_output.chars().count()),
            seeds_passing_threshold: self.pruned.as_ref().map(|p| p.seeds_passing_threshold),
            error: self.error.clone(),
        }
    }
}

/// Persisted, line-delimited form of an outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub interaction_id: String,
    pub final_answer: String,
    pub branch: Branch,
    pub rag_domain: Option<AnswerDomain>,
    pub rag_raw_len: Option<usize>,
    pub seeds_passing_threshold: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// True when the RAG exchange must not be used: no JSON answer could be
/// extracted, or the model declared the question invalid.
pub fn rag_answer_invalid(ex: &ModelExchange) -> bool {
    match ex.parsed() {
        None => true,
        Some(p) => classify_answer(&p.answer) == AnswerClass::InvalidQuestion,
    }
}

fn finetuned_answer(ex: &ModelExchange) -> String {
    match ex.parsed() {
        Some(p) => normalize_answer(&p.answer),
        None => normalize_answer(&ex.raw_output),
    }
}

/// Shared, thread-safe dependencies of the pipeline.
#[derive(Clone)]
pub struct Router {
    pub rag: Arc<dyn ChatBackend>,
    pub finetuned: Arc<dyn ChatBackend>,
    pub provider: Arc<dyn EmbeddingProvider>,
    pub pruner: PrunerConfig,
    pub mode: RouterMode,
    pub params: DecodeParams,
}

impl Router {
    pub fn new(
        rag: Arc<dyn ChatBackend>,
        finetuned: Arc<dyn ChatBackend>,
        provider: Arc<dyn EmbeddingProvider>,
        pruner: PrunerConfig,
    ) -> Self {
        Self {
            rag,
            finetuned,
            provider,
            pruner,
            mode: RouterMode::Hybrid,
            params: DecodeParams::new(),
        }
    }

    pub fn with_mode(mut self, mode: RouterMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn route(&self, record: &QueryRecord) -> Result<RoutingOutcome, RouteError> {
        let fallback = |branch, rag_exchange, pruned| -> Result<RoutingOutcome, RouteError> {
            let ft = ask_finetuned(self.finetuned.as_ref(), &record.query, &self.params)?;
            Ok(RoutingOutcome {
                interaction_id: record.interaction_id.clone(),
                final_answer: finetuned_answer(&ft),
                branch,
                rag_exchange,
                finetuned_exchange: Some(ft),
                pruned,
                error: None,
            })
        };

        if self.mode == RouterMode::FinetunedOnly {
            return fallback(Branch::FallbackFinetuned, None, None);
        }

        let sentences = segment_results(&record.search_results);
        let ctx = prune(&record.query, &sentences, self.provider.as_ref(), &self.pruner)?;
        if !gate(&ctx) {
            return fallback(Branch::FallbackNoContext, None, Some(ctx));
        }

        let rag = ask_rag(self.rag.as_ref(), &record.query, &ctx.expanded_text, &self.params)?;
        let accepted = match rag.parsed() {
            Some(p) if p.domain == AnswerDomain::Movie && !rag_answer_invalid(&rag) => {
                Some(normalize_answer(&p.answer))
            }
            _ => None,
        };
        match accepted {
            Some(answer) => Ok(RoutingOutcome {
                interaction_id: record.interaction_id.clone(),
                final_answer: answer,
                branch: Branch::RagMovieAccepted,
                rag_exchange: Some(rag),
                finetuned_exchange: None,
                pruned: Some(ctx),
                error: None,
            }),
            None => fallback(Branch::FallbackFinetuned, Some(rag), Some(ctx)),
        }
    }

    /// Route every record; failures become abstentions carrying an error
    /// note. Output order matches input order for any `parallelism`.
    pub fn run_batch(&self, records: &[QueryRecord], parallelism: usize) -> Vec<RoutingOutcome> {
        let one = |record: &QueryRecord| {
            self.route(record).unwrap_or_else(|err| {
                tracing::debug!(id = %record.interaction_id, error = %err, "question failed");
                RoutingOutcome::failed(&record.interaction_id, &err)
            })
        };
        if parallelism <= 1 {
            return records.iter().map(one).collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(parallelism).build() {
            Ok(pool) => pool.install(|| records.par_iter().map(one).collect()),
            Err(err) => {
                tracing::warn!(error = %err, "thread pool unavailable, running sequentially");
                records.iter().map(one).collect()
            }
        }
    }
}

/// Route a single record with explicit dependencies.
pub fn route(
    record: &QueryRecord,
    rag_backend: Arc<dyn ChatBackend>,
    ft_backend: Arc<dyn ChatBackend>,
    provider: Arc<dyn EmbeddingProvider>,
    cfg: &PrunerConfig,
) -> Result<RoutingOutcome, RouteError> {
    Router::new(rag_backend, ft_backend, provider, *cfg).route(record)
}

/// Count of outcomes per branch, every branch present.
pub fn branch_histogram(outcomes: &[RoutingOutcome]) -> BTreeMap<Branch, usize> {
    let mut hist: BTreeMap<Branch, usize> = Branch::ALL.iter().map(|b| (*b, 0)).collect();
    for o in outcomes {
        *hist.entry(o.branch).or_default() += 1;
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Domain, QuestionType, SearchResult, Timeliness};
    use crate::embedding::HashEmbedder;
    use crate::gateway::ScriptedBackend;

    const NOLAN: &str = "what 2010 film was directed by christopher nolan?";

    fn record(id: &str, query: &str, page: &str) -> QueryRecord {
        QueryRecord {
            interaction_id: id.into(),
            query: query.into(),
            answer: "inception".into(),
            alt_answers: vec![],
            question_type: QuestionType::Simple,
            domain: Domain::Movie,
            timeliness: Timeliness::Stable,
            search_results: vec![SearchResult {
                page_name: "p".into(),
                page_url: "https://example.org".into(),
                page_snippet: String::new(),
                page_result: page.into(),
            }],
        }
    }

    fn router(rag: ScriptedBackend, ft: ScriptedBackend) -> Router {
        Router::new(
            Arc::new(rag),
            Arc::new(ft),
            Arc::new(HashEmbedder::default()),
            PrunerConfig {
                threshold_n: 0.5,
                ..Default::default()
            },
        )
    }

    fn nolan_record() -> QueryRecord {
        record(
            "q1",
            NOLAN,
            "What 2010 film was directed by Christopher Nolan? Inception, of course. It stars many actors.",
        )
    }

    #[test]
    fn movie_answer_accepted() {
        let r = router(
            ScriptedBackend::new("rag", "").rule("nolan", r#"{"domain":"movie","answer":"Inception"}"#),
            ScriptedBackend::new("ft", I_DONT_KNOW),
        );
        let out = r.route(&nolan_record()).unwrap();
        assert_eq!(out.branch, Branch::RagMovieAccepted);
        assert_eq!(out.final_answer, "inception");
        assert!(out.finetuned_exchange.is_none());
        let ctx = out.pruned.unwrap();
        assert!(ctx.expanded_text.starts_with("<DOC> "));
    }

    #[test]
    fn unparseable_rag_falls_back() {
        let r = router(
            ScriptedBackend::new("rag", "").rule("nolan", "Inception, directed by Nolan."),
            ScriptedBackend::new("ft", I_DONT_KNOW),
        );
        let out = r.route(&nolan_record()).unwrap();
        assert_eq!(out.branch, Branch::FallbackFinetuned);
        assert_eq!(out.final_answer, I_DONT_KNOW);
        assert!(!out.final_answer.contains("inception"));
    }

    #[test]
    fn non_movie_domain_falls_back() {
        let r = router(
            ScriptedBackend::new("rag", "").rule("nolan", r#"{"domain":"finance","answer":"inception"}"#),
            ScriptedBackend::new("ft", "I don't know."),
        );
        let out = r.route(&nolan_record()).unwrap();
        assert_eq!(out.branch, Branch::FallbackFinetuned);
        assert_eq!(out.final_answer, I_DONT_KNOW);
        assert_eq!(out.rag_domain(), Some(AnswerDomain::Finance));
    }

    #[test]
    fn movie_i_dont_know_is_accepted() {
        let r = router(
            ScriptedBackend::new("rag", "").rule("nolan", r#"{"domain":"movie","answer":"I don't know"}"#),
            ScriptedBackend::new("ft", "inception"),
        );
        let out = r.route(&nolan_record()).unwrap();
        assert_eq!(out.branch, Branch::RagMovieAccepted);
        assert_eq!(out.final_answer, I_DONT_KNOW);
    }

    #[test]
    fn no_context_skips_rag() {
        let r = router(
            ScriptedBackend::new("rag", "").failing_rule("nolan", "must not be called"),
            ScriptedBackend::new("ft", I_DONT_KNOW),
        );
        let rec = record("q1", NOLAN, "Quarterly revenue grew in every region.");
        let out = r.route(&rec).unwrap();
        assert_eq!(out.branch, Branch::FallbackNoContext);
        assert!(out.rag_exchange.is_none());
        assert_eq!(out.pruned.unwrap().seeds_passing_threshold, 0);
    }

    #[test]
    fn finetuned_only_mode() {
        let r = router(
            ScriptedBackend::new("rag", "").failing_rule("nolan", "must not be called"),
            ScriptedBackend::new("ft", I_DONT_KNOW),
        )
        .with_mode(RouterMode::FinetunedOnly);
        let out = r.route(&nolan_record()).unwrap();
        assert_eq!(out.branch, Branch::FallbackFinetuned);
        assert!(out.pruned.is_none());
    }

    #[test]
    fn batch_isolates_failures() {
        let r = router(
            ScriptedBackend::new("rag", "")
                .rule("nolan", r#"{"domain":"movie","answer":"inception"}"#)
                .failing_rule("broken", "backend down"),
            ScriptedBackend::new("ft", I_DONT_KNOW),
        );
        let recs = vec![
            nolan_record(),
            record("q2", "broken nolan question", "broken nolan question here."),
            record("q3", "no match at all", "Unrelated text."),
        ];
        let outs = r.run_batch(&recs, 2);
        assert_eq!(outs.len(), 3);
        assert_eq!(outs[0].final_answer, "inception");
        assert_eq!(outs[1].final_answer, I_DONT_KNOW);
        assert!(outs[1].error.as_deref().unwrap().contains("backend down"));
        assert!(outs[2].error.is_none());
        assert_eq!(r.run_batch(&recs, 1), outs);
        assert!(r.run_batch(&[], 4).is_empty());
    }

    #[test]
    fn outcome_record_shape() {
        let r = router(
            ScriptedBackend::new("rag", "").rule("nolan", r#"{"domain":"movie","answer":"inception"}"#),
            ScriptedBackend::new("ft", I_DONT_KNOW),
        );
        let rec = r.route(&nolan_record()).unwrap().to_record();
        let line = serde_json::to_string(&rec).unwrap();
        let positions: Vec<usize> = [
            "\"interaction_id\"",
            "\"final_answer\"",
            "\"branch\"",
            "\"rag_domain\"",
            "\"rag_raw_len\"",
            "\"seeds_passing_threshold\"",
        ]
        .iter()
        .map(|k| line.find(k).unwrap())
        .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{line}");
        assert!(!line.contains("\"error\""));
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["branch"], "rag_movie_accepted");
        assert_eq!(v["rag_domain"], "movie");
    }

    #[test]
    fn histogram_lists_all_branches() {
        let h = branch_histogram(&[]);
        assert_eq!(h.len(), 3);
        assert!(h.values().all(|&c| c == 0));
    }
}
