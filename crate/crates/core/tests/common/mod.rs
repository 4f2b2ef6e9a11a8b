#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use honest_rag::corpus::SentenceUnit;
use honest_rag::embedding::{EmbeddingError, EmbeddingProvider, EmbeddingVector};
use honest_rag::pruner::PrunerConfig;
use rand::Rng;

/// Provider returning preassigned vectors; unknown text is an error.
pub struct TableProvider {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingProvider for TableProvider {
    fn name(&self) -> &str {
        "table"
    }
    fn dimension(&self) -> usize {
        self.dim
    }
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let v = self.vectors.get(text).ok_or_else(|| EmbeddingError::ProviderFailure {
            provider: "table".into(),
            message: format!("unknown text {text:?}"),
        })?;
        EmbeddingVector::new(v.clone())
    }
}

pub struct RandomCorpus {
    pub query: String,
    pub units: Vec<SentenceUnit>,
    pub provider: TableProvider,
}

/// Up to `max_units` sentences over a few documents and paragraphs, with
/// random 3-d vectors biased towards the query so high similarities occur.
/// Some sentences share a vector (ties) and a few are zero vectors.
pub fn random_corpus(rng: &mut impl Rng, max_units: usize) -> RandomCorpus {
    let dim = 3;
    let n = rng.gen_range(0..=max_units);
    let mut units = Vec::new();
    let (mut doc, mut para, mut sent) = (0usize, 0usize, 0usize);
    for i in 0..n {
        if i > 0 {
            let r: f64 = rng.gen();
            if r < 0.1 {
                doc += 1;
                para = 0;
                sent = 0;
            } else if r < 0.3 {
                para += 1;
                sent = 0;
            }
        }
        units.push(SentenceUnit {
            doc_index: doc,
            para_index: para,
            sent_index: sent,
            text: format!("sentence {i}."),
        });
        sent += 1;
    }
    let mut vectors = HashMap::new();
    vectors.insert("query".to_string(), vec![1.0, 0.3, 0.0]);
    let mut previous: Option<Vec<f64>> = None;
    for u in &units {
        let v = match (rng.gen_range(0..10), &previous) {
            (0, Some(p)) => p.clone(),
            (1, _) => vec![0.0; dim],
            _ => (0..dim)
                .map(|d| {
                    if d == 0 {
                        rng.gen_range(0.0..2.0)
                    } else {
                        rng.gen_range(-1.0..1.0)
                    }
                })
                .collect(),
        };
        previous = Some(v.clone());
        vectors.insert(u.text.clone(), v);
    }
    RandomCorpus {
        query: "query".into(),
        units,
        provider: TableProvider { dim, vectors },
    }
}

pub fn random_config(rng: &mut impl Rng) -> PrunerConfig {
    PrunerConfig {
        top_k: rng.gen_range(1..=10),
        expand_m: rng.gen_range(0..=3),
        threshold_n: [0.0, 0.3, 0.75, 0.8][rng.gen_range(0..4)],
        max_context_chars: if rng.gen_bool(0.3) {
            rng.gen_range(10..200)
        } else {
            100_000
        },
    }
}

#[derive(Debug, PartialEq)]
pub struct OracleResult {
    pub seeds: Vec<(usize, usize, usize)>,
    pub similarities: Vec<f64>,
    pub units: BTreeSet<(usize, usize, usize)>,
    pub text: String,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Reference pruner: rank by counting, expand by paragraph position,
/// render by picking the longest fitting prefix.
pub fn oracle_prune(
    query: &str,
    units: &[SentenceUnit],
    provider: &dyn EmbeddingProvider,
    cfg: &PrunerConfig,
) -> OracleResult {
    let q = provider.embed(query).unwrap();
    let sims: Vec<f64> = units
        .iter()
        .map(|u| cosine(q.values(), provider.embed(&u.text).unwrap().values()))
        .collect();
    let key = |i: usize| (units[i].doc_index, units[i].para_index, units[i].sent_index);
    let rank = |i: usize| {
        (0..units.len())
            .filter(|&j| sims[j] > sims[i] || (sims[j] == sims[i] && key(j) < key(i)))
            .count()
    };
    let mut seeds: Vec<usize> = (0..units.len())
        .filter(|&i| rank(i) < cfg.top_k && sims[i] >= cfg.threshold_n)
        .collect();
    seeds.sort_by_key(|&i| rank(i));

    let pos_in_para = |i: usize| {
        (0..units.len())
            .filter(|&j| key(j).0 == key(i).0 && key(j).1 == key(i).1 && key(j).2 < key(i).2)
            .count()
    };
    let mut included = BTreeSet::new();
    for i in 0..units.len() {
        let hit = seeds.iter().any(|&s| {
            key(s).0 == key(i).0
                && key(s).1 == key(i).1
                && pos_in_para(i) >= pos_in_para(s)
                && pos_in_para(i) <= pos_in_para(s) + cfg.expand_m
        });
        if hit {
            included.insert(key(i));
        }
    }

    let ordered: Vec<&SentenceUnit> = included
        .iter()
        .map(|k| {
            units
                .iter()
                .find(|u| (u.doc_index, u.para_index, u.sent_index) == *k)
                .unwrap()
        })
        .collect();
    let mut pieces: Vec<String> = Vec::new();
    for (idx, u) in ordered.iter().enumerate() {
        let prefix = if idx == 0 {
            "<DOC> ".to_string()
        } else if ordered[idx - 1].doc_index != u.doc_index {
            "\n<DOC> ".to_string()
        } else {
            " ".to_string()
        };
        pieces.push(prefix + &u.text);
    }
    let mut best = 0;
    for take in 0..=pieces.len() {
        let len: usize = pieces[..take].iter().map(|p| p.chars().count()).sum();
        if len <= cfg.max_context_chars {
            best = take;
        }
    }
    let text = if best == 0 && !pieces.is_empty() {
        pieces[0].chars().take(cfg.max_context_chars).collect()
    } else {
        pieces[..best].concat()
    };

    OracleResult {
        similarities: seeds.iter().map(|&i| sims[i]).collect(),
        seeds: seeds.iter().map(|&i| key(i)).collect(),
        units: included,
        text,
    }
}

pub fn matches_oracle(
    query: &str,
    units: &[SentenceUnit],
    provider: &dyn EmbeddingProvider,
    cfg: &PrunerConfig,
) -> Result<(), String> {
    let got = honest_rag::prune(query, units, provider, cfg).map_err(|e| e.to_string())?;
    let want = oracle_prune(query, units, provider, cfg);
    let got = OracleResult {
        seeds: got.selected.iter().map(|s| s.unit.key()).collect(),
        similarities: got.selected.iter().map(|s| s.similarity).collect(),
        units: got.units.iter().map(|u| u.key()).collect(),
        text: got.expanded_text,
    };
    if got == want {
        Ok(())
    } else {
        Err(format!("cfg {cfg:?}\n got {got:?}\nwant {want:?}"))
    }
}

pub fn seed_keys(
    query: &str,
    units: &[SentenceUnit],
    provider: &dyn EmbeddingProvider,
    cfg: &PrunerConfig,
) -> BTreeSet<(usize, usize, usize)> {
    honest_rag::prune(query, units, provider, cfg)
        .unwrap()
        .selected
        .iter()
        .map(|s| s.unit.key())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RagReply {
    Valid,
    InvalidQuestion,
    ParseError,
}

pub struct RouterCase {
    pub gate_open: bool,
    pub domain: &'static str,
    pub reply: RagReply,
}

/// Every combination of gate state, RAG domain label and RAG reply shape.
pub fn router_cases() -> Vec<RouterCase> {
    let mut out = Vec::new();
    for gate_open in [true, false] {
        for domain in ["movie", "sports"] {
            for reply in [RagReply::Valid, RagReply::InvalidQuestion, RagReply::ParseError] {
                out.push(RouterCase {
                    gate_open,
                    domain,
                    reply,
                });
            }
        }
    }
    out
}

pub const CASE_QUERY: &str = "who directed the film heat";
pub const RAG_ANSWER: &str = "michael mann";
pub const FT_ANSWER: &str = "i don't know";

/// Runs one case through the hybrid router with the hashing embedder.
/// An open gate comes from a page repeating the query verbatim.
pub fn run_router_case(case: &RouterCase) -> honest_rag::RoutingOutcome {
    use honest_rag::corpus::{Domain, QuestionType, SearchResult, Timeliness};
    use honest_rag::{HashEmbedder, QueryRecord, Router, ScriptedBackend};
    use std::sync::Arc;

    let page = if case.gate_open {
        format!("{CASE_QUERY}.")
    } else {
        "Bananas ripen quickly in warm kitchens.".to_string()
    };
    let record = QueryRecord {
        interaction_id: "case".into(),
        query: CASE_QUERY.into(),
        answer: RAG_ANSWER.into(),
        alt_answers: vec![],
        question_type: QuestionType::Simple,
        domain: Domain::Movie,
        timeliness: Timeliness::Stable,
        search_results: vec![SearchResult {
            page_name: "p".into(),
            page_url: "https://example.org/p".into(),
            page_snippet: String::new(),
            page_result: page,
        }],
    };
    let rag_text = match case.reply {
        RagReply::Valid => format!(r#"{{"domain": "{}", "answer": "{RAG_ANSWER}"}}"#, case.domain),
        RagReply::InvalidQuestion => format!(r#"{{"domain": "{}", "answer": "invalid question"}}"#, case.domain),
        RagReply::ParseError => "the answer is michael mann".to_string(),
    };
    let rag = ScriptedBackend::new("rag", "unused").rule(CASE_QUERY, rag_text);
    let ft = ScriptedBackend::new("ft", FT_ANSWER);
    Router::new(
        Arc::new(rag),
        Arc::new(ft),
        Arc::new(HashEmbedder::default()),
        Default::default(),
    )
    .route(&record)
    .unwrap()
}
