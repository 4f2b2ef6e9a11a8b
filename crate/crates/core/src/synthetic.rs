//! Synthetic CRAG-like benchmark with matching scripted model replies.
//!
//! Every record belongs to a scenario that fixes how the two scripted models
//! answer it and how similar its best retrieved sentence is to the question
//! under [`hash_embed`]. Similarity bands are checked against the real
//! embedding while generating, so a pruner using [`HashEmbedder`] with the
//! same dimension sees exactly the intended band.
//!
//! With the default 300 records the fine-tuned model alone answers 33
//! questions correctly and 11 wrongly. The RAG model adds 4 correct / 2 wrong
//! movie answers whose best sentence clears 0.8, and another 4 / 2 whose best
//! sentence sits in [0.75, 0.8).
//!
//! [`HashEmbedder`]: crate::embedding::HashEmbedder

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::corpus::{Domain, QueryRecord, QuestionType, SearchResult, Timeliness};
use crate::embedding::{cosine_similarity, hash_embed, DEFAULT_HASH_DIMENSION};
use crate::gateway::{Script, ScriptReply, ScriptRule, ScriptSet};
use crate::router::I_DONT_KNOW;

/// Similarity band of a record's best sentence, as `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

pub const HIGH_BAND: Band = Band { lo: 0.82, hi: 1.01 };
pub const MID_BAND: Band = Band { lo: 0.755, hi: 0.795 };
pub const LOW_BAND: Band = Band { lo: 0.35, hi: 0.7 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Movie question, RAG answers correctly, best sentence >= 0.8.
    MovieHighCorrect,
    MovieHighWrong,
    /// Movie question, best sentence in [0.75, 0.8).
    MovieMidCorrect,
    MovieMidWrong,
    /// Movie question whose context never clears 0.75.
    MovieLowContext,
    /// RAG output contains no JSON object.
    MovieUnparseable,
    /// RAG labels a movie question with another domain.
    MovieMislabelled,
    FalsePremise,
    Comparison,
    /// Comparison the fine-tuned model answers in a longer phrase.
    ComparisonVerbose,
    Binary,
    /// Fine-tuned model answers a non-movie question wrongly.
    FinetunedHallucination,
    /// Non-movie question both models leave to abstention.
    Other,
}

/// Scenario counts for the first 300 records, excluding the six hand-written
/// records that open every fixture.
const PLAN: [(Scenario, usize); 13] = [
    (Scenario::MovieHighCorrect, 3),
    (Scenario::MovieHighWrong, 1),
    (Scenario::MovieMidCorrect, 3),
    (Scenario::MovieMidWrong, 1),
    (Scenario::MovieLowContext, 20),
    (Scenario::MovieUnparseable, 5),
    (Scenario::MovieMislabelled, 3),
    (Scenario::FalsePremise, 19),
    (Scenario::Comparison, 6),
    (Scenario::ComparisonVerbose, 1),
    (Scenario::Binary, 5),
    (Scenario::FinetunedHallucination, 11),
    (Scenario::Other, 216),
];

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub records: usize,
    pub seed: u64,
    /// Dimension of the hash embedding the bands are calibrated for.
    pub dimension: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            records: 300,
            seed: 2024,
            dimension: DEFAULT_HASH_DIMENSION,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticBench {
    pub records: Vec<QueryRecord>,
    pub scenarios: Vec<Scenario>,
    pub scripts: ScriptSet,
}

impl SyntheticBench {
    pub fn write_fixture(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        write_fixture(&self.records, path)
    }

    pub fn write_scripts(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(&self.scripts).expect("scripts serialize");
        std::fs::write(path, text + "\n")
    }
}

pub fn write_fixture(records: &[QueryRecord], path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        writeln!(file, "{}", r.to_fixture_line())?;
    }
    file.flush()
}

const FILLER: &[&str] = &[
    "the", "a", "review", "critics", "audience", "during", "season", "many", "later", "report", "story", "public",
    "record", "career", "early", "final", "several", "major", "known", "also", "which", "their", "world", "history",
    "summer", "city", "award", "release", "studio", "version", "edition", "opening", "market", "price", "team",
    "league", "album", "track", "music", "fans", "series", "episode", "screen", "budget", "office", "box", "weekend",
    "sales", "chart", "ticket", "cast", "crew", "scene", "sequel",
];

const SYLLABLES: &[&str] = &[
    "ka", "ro", "vel", "mi", "dan", "tor", "ea", "lu", "sen", "qua", "bri", "mo", "zen", "ta", "lor", "vi", "nus",
    "pe", "gal", "dri", "os", "fen", "ri", "cor", "ul", "ja", "mer", "shi", "bo", "tal",
];

struct Gen {
    rng: ChaCha8Rng,
    dimension: usize,
    used_words: HashSet<String>,
}

impl Gen {
    fn word(&mut self) -> String {
        loop {
            let n = self.rng.gen_range(2..=3);
            let w: String = (0..n)
                .map(|_| *SYLLABLES.choose(&mut self.rng).expect("non-empty"))
                .collect();
            if !FILLER.contains(&w.as_str()) && self.used_words.insert(w.clone()) {
                return w;
            }
        }
    }

    fn title(&mut self) -> String {
        let n = self.rng.gen_range(1..=2);
        (0..n).map(|_| self.word()).collect::<Vec<_>>().join(" ")
    }

    fn similarity(&self, a: &str, b: &str) -> f64 {
        cosine_similarity(&hash_embed(a, self.dimension), &hash_embed(b, self.dimension)).unwrap_or(0.0)
    }

    /// A sentence whose similarity to `query` lies in `band`.
    fn sentence_in_band(&mut self, query: &str, band: Band) -> String {
        let qtokens: Vec<String> = crate::embedding::hash_tokens(query).collect();
        for _ in 0..20_000 {
            let keep = self.rng.gen_range(1..=qtokens.len());
            let mut words: Vec<String> = qtokens.choose_multiple(&mut self.rng, keep).cloned().collect();
            let fillers = self.rng.gen_range(0..=14);
            for _ in 0..fillers {
                let f = *FILLER.choose(&mut self.rng).expect("non-empty");
                if !qtokens.iter().any(|q| q == f) {
                    words.push(f.to_string());
                }
            }
            words.shuffle(&mut self.rng);
            let text = format!("{}.", words.join(" "));
            let s = self.similarity(query, &text);
            if s >= band.lo && s < band.hi {
                return capitalize(&text);
            }
        }
        panic!("no sentence in band {band:?} for {query:?}");
    }

    /// A sentence unlikely to resemble the query, below `ceiling`.
    fn distractor(&mut self, query: &str, ceiling: f64) -> String {
        loop {
            let n = self.rng.gen_range(5..=12);
            let mut words: Vec<String> = (0..n)
                .map(|_| FILLER.choose(&mut self.rng).expect("non-empty").to_string())
                .collect();
            if self.rng.gen_bool(0.5) {
                words.push(self.word());
            }
            let text = format!("{}.", words.join(" "));
            if self.similarity(query, &text) < ceiling {
                return capitalize(&text);
            }
        }
    }

    /// Pages whose best sentence lies in `band` and every other sentence
    /// stays below `band.lo`.
    fn pages(&mut self, query: &str, band: Band) -> Vec<SearchResult> {
        let n_pages = self.rng.gen_range(1..=3);
        let target_page = self.rng.gen_range(0..n_pages);
        let ceiling = band.lo.min(0.5);
        (0..n_pages)
            .map(|p| {
                let n_paras = self.rng.gen_range(1..=3);
                let mut paras: Vec<Vec<String>> = (0..n_paras)
                    .map(|_| {
                        let n = self.rng.gen_range(1..=4);
                        (0..n).map(|_| self.distractor(query, ceiling)).collect()
                    })
                    .collect();
                if p == target_page {
                    let para = self.rng.gen_range(0..paras.len());
                    let pos = self.rng.gen_range(0..=paras[para].len());
                    let sentence = self.sentence_in_band(query, band);
                    paras[para].insert(pos, sentence);
                }
                let body = paras
                    .iter()
                    .map(|sents| sents.join(" "))
                    .collect::<Vec<_>>()
                    .join("\n\n");
                let name = self.title();
                let snippet = paras[0][0].clone();
                let use_snippet_only = self.rng.gen_bool(0.15) && paras.len() == 1 && paras[0].len() == 1;
                SearchResult {
                    page_url: format!("https://example.org/{}", name.replace(' ', "-")),
                    page_name: capitalize(&name),
                    page_snippet: snippet,
                    page_result: if use_snippet_only { String::new() } else { body },
                }
            })
            .collect()
    }

    fn timeliness(&mut self) -> Timeliness {
        *Timeliness::ALL.choose(&mut self.rng).expect("non-empty")
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn rag_json(domain: &str, answer: &str) -> String {
    json!({ "domain": domain, "answer": answer }).to_string()
}

/// RAG reply in the shape models tend to produce: the object, then chatter.
fn rag_chatty(domain: &str, answer: &str) -> String {
    format!(
        "{{\n  \"domain\": \"{domain}\",\n  \"answer\": \"{answer}\"\n}}\n\"\"\"\n# Step 1: Determine the domain\ndomain = \"{domain}\"\n# Step 2: Answer the question\nresult = {{\"domain\": domain, \"answer\": answer}}"
    )
}

fn rag_label(domain: Domain) -> &'static str {
    match domain {
        Domain::Finance => "finance",
        Domain::Sports => "sports",
        Domain::Music => "music",
        Domain::Movie => "movie",
        Domain::Open => "encyclopedia",
    }
}

struct Item {
    record: QueryRecord,
    scenario: Scenario,
    rag: String,
    finetuned: String,
}

#[allow(clippy::too_many_arguments)]
fn item(
    g: &mut Gen,
    id: usize,
    scenario: Scenario,
    query: String,
    answer: &str,
    alt: Vec<String>,
    question_type: QuestionType,
    domain: Domain,
    band: Band,
    rag: String,
    finetuned: String,
) -> Item {
    let search_results = g.pages(&query, band);
    Item {
        record: QueryRecord {
            interaction_id: format!("syn-{id:04}"),
            query,
            answer: answer.to_string(),
            alt_answers: alt,
            question_type,
            domain,
            timeliness: g.timeliness(),
            search_results,
        },
        scenario,
        rag,
        finetuned,
    }
}

fn hand_written(g: &mut Gen) -> Vec<Item> {
    vec![
        item(
            g,
            0,
            Scenario::FalsePremise,
            "when did hamburg become the biggest city of germany?".into(),
            "invalid question",
            vec![],
            QuestionType::FalsePremise,
            Domain::Open,
            HIGH_BAND,
            rag_json("encyclopedia", "invalid question"),
            "invalid question".into(),
        ),
        item(
            g,
            1,
            Scenario::Comparison,
            "which wta player had a higher singles ranking to end last year, madison keys or daria kasatkina?".into(),
            "madison keys",
            vec![],
            QuestionType::Comparison,
            Domain::Sports,
            HIGH_BAND,
            rag_json("sports", "madison keys"),
            "madison keys".into(),
        ),
        item(
            g,
            2,
            Scenario::MovieHighCorrect,
            "what 2010 film was directed by christopher nolan?".into(),
            "inception",
            vec![],
            QuestionType::Simple,
            Domain::Movie,
            HIGH_BAND,
            rag_chatty("movie", "Inception"),
            I_DONT_KNOW.into(),
        ),
        item(
            g,
            3,
            Scenario::MovieHighWrong,
            "who were the producers of the movie paul blart: mall cop?".into(),
            "adam sandler, jack giarraputo, kevin james, todd garner, barry bernardi",
            vec![],
            QuestionType::Set,
            Domain::Movie,
            HIGH_BAND,
            rag_json("movie", "steve carr, kevin james, and nick bakay"),
            I_DONT_KNOW.into(),
        ),
        item(
            g,
            4,
            Scenario::MovieMidCorrect,
            "when was the birth of michael bay?".into(),
            "1965-02-17",
            vec!["february 17, 1965".into()],
            QuestionType::Simple,
            Domain::Movie,
            MID_BAND,
            rag_json("movie", "michael bay was born on february 17, 1965."),
            I_DONT_KNOW.into(),
        ),
        item(
            g,
            5,
            Scenario::MovieMidWrong,
            "in 2004, which animated film was recognized with the best animated feature film oscar?".into(),
            "finding nemo",
            vec![],
            QuestionType::SimpleWithCondition,
            Domain::Movie,
            MID_BAND,
            rag_json("movie", "the incredibles"),
            I_DONT_KNOW.into(),
        ),
    ]
}

fn generated(g: &mut Gen, id: usize, scenario: Scenario) -> Item {
    use Scenario::*;
    let non_movie = [Domain::Finance, Domain::Sports, Domain::Music, Domain::Open];
    match scenario {
        MovieHighCorrect | MovieHighWrong | MovieMidCorrect | MovieMidWrong | MovieLowContext | MovieUnparseable
        | MovieMislabelled => {
            let (query, truth) = if g.rng.gen_bool(0.5) {
                let title = g.title();
                (
                    format!("who directed the movie {title}?"),
                    format!("{} {}", g.word(), g.word()),
                )
            } else {
                let person = format!("{} {}", g.word(), g.word());
                (format!("what was the first film starring {person}?"), g.title())
            };
            let wrong = g.title();
            let (band, rag) = match scenario {
                MovieHighCorrect => (HIGH_BAND, rag_chatty("movie", &truth)),
                MovieHighWrong => (HIGH_BAND, rag_json("movie", &wrong)),
                MovieMidCorrect => (MID_BAND, rag_chatty("movie", &truth)),
                MovieMidWrong => (MID_BAND, rag_json("movie", &wrong)),
                MovieLowContext => (LOW_BAND, rag_json("movie", &truth)),
                MovieUnparseable => (
                    HIGH_BAND,
                    format!("The answer is {truth}, according to the references."),
                ),
                _ => (HIGH_BAND, rag_json("encyclopedia", &truth)),
            };
            item(
                g,
                id,
                scenario,
                query,
                &truth,
                vec![],
                QuestionType::Simple,
                Domain::Movie,
                band,
                rag,
                I_DONT_KNOW.into(),
            )
        }
        FalsePremise => {
            let domain = *[
                Domain::Movie,
                Domain::Music,
                Domain::Sports,
                Domain::Finance,
                Domain::Open,
            ]
            .choose(&mut g.rng)
            .expect("non-empty");
            let query = format!(
                "what is the name of {}'s rap album before {} turned to pop?",
                g.word(),
                g.word()
            );
            let band = if g.rng.gen_bool(0.5) { HIGH_BAND } else { LOW_BAND };
            let rag = rag_json(rag_label(domain), "invalid question");
            item(
                g,
                id,
                scenario,
                query,
                "invalid question",
                vec![],
                QuestionType::FalsePremise,
                domain,
                band,
                rag,
                "invalid question".into(),
            )
        }
        Comparison | ComparisonVerbose => {
            let (a, b) = (
                format!("{} {}", g.word(), g.word()),
                format!("{} {}", g.word(), g.word()),
            );
            let query = format!("which player had more titles last season, {a} or {b}?");
            let ft = if scenario == ComparisonVerbose {
                format!("it was {a}")
            } else {
                a.clone()
            };
            let rag = rag_json("sports", &a);
            item(
                g,
                id,
                scenario,
                query,
                &a,
                vec![],
                QuestionType::Comparison,
                Domain::Sports,
                HIGH_BAND,
                rag,
                ft,
            )
        }
        Binary => {
            let domain = *non_movie.choose(&mut g.rng).expect("non-empty");
            let answer = if g.rng.gen_bool(0.5) { "yes" } else { "no" };
            let query = format!("did {} release more than one record with {}?", g.word(), g.word());
            let rag = rag_json(rag_label(domain), answer);
            item(
                g,
                id,
                scenario,
                query,
                answer,
                vec![],
                QuestionType::Aggregation,
                domain,
                LOW_BAND,
                rag,
                answer.into(),
            )
        }
        FinetunedHallucination | Other => {
            let domain = *non_movie.choose(&mut g.rng).expect("non-empty");
            let qt = *[
                QuestionType::Simple,
                QuestionType::SimpleWithCondition,
                QuestionType::Aggregation,
                QuestionType::Set,
                QuestionType::PostProcessing,
                QuestionType::MultiHop,
            ]
            .choose(&mut g.rng)
            .expect("non-empty");
            let query = format!("what is the {} of {} in {}?", g.word(), g.word(), g.word());
            let truth = g.title();
            let wrong = g.title();
            let band = *[HIGH_BAND, MID_BAND, LOW_BAND].choose(&mut g.rng).expect("non-empty");
            let ft = if scenario == FinetunedHallucination {
                wrong.clone()
            } else {
                I_DONT_KNOW.into()
            };
            let rag_answer = if g.rng.gen_bool(0.5) { truth.clone() } else { wrong };
            let rag = rag_json(rag_label(domain), &rag_answer);
            item(g, id, scenario, query, &truth, vec![], qt, domain, band, rag, ft)
        }
    }
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticBench {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        dimension: cfg.dimension,
        used_words: HashSet::new(),
    };
    let mut items = hand_written(&mut g);
    let mut plan: Vec<Scenario> = PLAN.iter().flat_map(|&(s, c)| std::iter::repeat_n(s, c)).collect();
    plan.shuffle(&mut g.rng);
    let extra = cfg.records.saturating_sub(items.len() + plan.len());
    plan.extend(std::iter::repeat_n(Scenario::Other, extra));
    plan.truncate(cfg.records.saturating_sub(items.len()));
    for scenario in plan {
        let id = items.len();
        items.push(generated(&mut g, id, scenario));
    }
    items.truncate(cfg.records);

    let rule = |query: &str, reply: &str| ScriptRule {
        contains: query.to_lowercase(),
        reply: ScriptReply::Text(reply.to_string()),
    };
    let scripts = ScriptSet {
        rag: Script {
            name: Some("synthetic-rag".into()),
            rules: items.iter().map(|i| rule(&i.record.query, &i.rag)).collect(),
            default: rag_json("other", I_DONT_KNOW),
        },
        finetuned: Script {
            name: Some("synthetic-finetuned".into()),
            rules: items.iter().map(|i| rule(&i.record.query, &i.finetuned)).collect(),
            default: I_DONT_KNOW.into(),
        },
    };
    SyntheticBench {
        scenarios: items.iter().map(|i| i.scenario).collect(),
        records: items.into_iter().map(|i| i.record).collect(),
        scripts,
    }
}
