//! Fine-tuning data for the abstaining model.
//!
//! A fixed number of questions is held out for testing. For the rest, the
//! answer is kept only for comparison and false-premise questions and for
//! yes/no/true/false answers; every other answer becomes "i don't know".

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{QueryRecord, QuestionType};
use crate::router::I_DONT_KNOW;
use crate::text::normalize_answer;

pub const DEFAULT_HOLDOUT: usize = 250;
pub const BINARY_ANSWERS: [&str; 4] = ["yes", "no", "true", "false"];

#[derive(Debug, Error)]
pub enum PrepError {
    #[error("need more than {holdout} records to hold out {holdout}, got {available}")]
    InsufficientRecords { holdout: usize, available: usize },
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinetuneExample {
    pub query: String,
    pub target: String,
    pub question_type: QuestionType,
    pub replaced: bool,
}

/// Hyperparameters handed to an external QLoRA trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainManifest {
    pub lora_alpha: u32,
    pub lora_r: u32,
    pub lora_dropout: f64,
    pub batch_size: u32,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: u32,
    pub quantization: String,
    pub holdout_count: usize,
}

impl Default for TrainManifest {
    fn default() -> Self {
        Self {
            lora_alpha: 16,
            lora_r: 64,
            lora_dropout: 0.1,
            batch_size: 8,
            learning_rate: 0.0002,
            weight_decay: 0.001,
            epochs: 5,
            quantization: "4-bit".to_string(),
            holdout_count: DEFAULT_HOLDOUT,
        }
    }
}

/// Shuffle with `seed` and split off the first `holdout` records as the
/// test set. Returns `(train, test)`.
pub fn split_holdout(
    records: &[QueryRecord],
    holdout: usize,
    seed: u64,
) -> Result<(Vec<QueryRecord>, Vec<QueryRecord>), PrepError> {
    if holdout == 0 {
        return Ok((records.to_vec(), Vec::new()));
    }
    if records.len() <= holdout {
        return Err(PrepError::InsufficientRecords {
            holdout,
            available: records.len(),
        });
    }
    let mut shuffled = records.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train = shuffled.split_off(holdout);
    Ok((train, shuffled))
}

/// Whether a record keeps its original answer as the training target.
pub fn keeps_answer(question_type: QuestionType, answer: &str) -> bool {
    matches!(question_type, QuestionType::Comparison | QuestionType::FalsePremise)
        || BINARY_ANSWERS.contains(&normalize_answer(answer).as_str())
}

pub fn transform(record: &QueryRecord) -> FinetuneExample {
    let keep = keeps_answer(record.question_type, &record.answer);
    FinetuneExample {
        query: record.query.clone(),
        target: if keep {
            normalize_answer(&record.answer)
        } else {
            I_DONT_KNOW.to_string()
        },
        question_type: record.question_type,
        replaced: !keep,
    }
}

#[derive(Serialize)]
struct TrainLine<'a> {
    query: &'a str,
    target: &'a str,
}

/// Write `train.jsonl` and `manifest.json` into `out_dir` (created if
/// missing). Output is byte-identical for identical input.
pub fn emit_training_files(train: &[FinetuneExample], out_dir: impl AsRef<Path>) -> Result<TrainManifest, PrepError> {
    let out_dir = out_dir.as_ref();
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| PrepError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;

    let train_path = out_dir.join("train.jsonl");
    let mut buf = Vec::new();
    for ex in train {
        serde_json::to_writer(
            &mut buf,
            &TrainLine {
                query: &ex.query,
                target: &ex.target,
            },
        )
        .expect("train line serializes");
        buf.push(b'\n');
    }
    fs::write(&train_path, &buf).map_err(io(&train_path))?;

    let manifest = TrainManifest::default();
    let manifest_path = out_dir.join("manifest.json");
    let mut file = fs::File::create(&manifest_path).map_err(io(&manifest_path))?;
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    writeln!(file, "{text}").map_err(io(&manifest_path))?;
    Ok(manifest)
}
