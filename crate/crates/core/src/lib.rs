//! Hybrid question answering that prefers "i don't know" to a wrong answer.
//!
//! A RAG model answers from pruned search results. Its answer is kept only
//! for movie questions, where retrieval is reliable. Every other question is
//! answered by a model fine-tuned to abstain on anything it cannot answer
//! safely. Models and embeddings sit behind traits, so the whole pipeline
//! runs offline with the scripted backend and the hashing embedder.
//!
//! - [`corpus`]: fixture loading and sentence segmentation
//! - [`embedding`]: vectors, cosine similarity, providers
//! - [`pruner`]: top-k sentence selection with expansion and a similarity gate
//! - [`gateway`]: prompt rendering, chat backends, first-JSON extraction
//! - [`router`]: the hybrid routing decision and batch runner
//! - [`dataset_prep`]: fine-tuning data and the trainer manifest
//! - [`scorer`]: CRAG-style judging and metric tables
//! - [`synthetic`]: a generated benchmark with matching scripted replies

pub mod corpus;
pub mod dataset_prep;
pub mod embedding;
pub mod gateway;
pub mod pruner;
pub mod router;
pub mod scorer;
pub mod synthetic;
pub mod text;

pub use corpus::{load_dataset, segment, QueryRecord, SearchResult, SentenceUnit};
pub use embedding::{cosine_similarity, hash_embed, EmbeddingProvider, EmbeddingVector, HashEmbedder};
pub use gateway::{extract_first_json, render_rag_prompt, ChatBackend, ScriptedBackend};
pub use pruner::{gate, prune, PrunedContext, PrunerConfig};
pub use router::{Branch, Router, RoutingOutcome};
pub use scorer::{judge, score_batch, Scorecard, ScoringMode, Verdict};
