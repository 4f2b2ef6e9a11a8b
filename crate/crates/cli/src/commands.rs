use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use honest_rag::corpus::{load_dataset_with, CorpusError, Domain, LoadOptions};
use honest_rag::dataset_prep::{emit_training_files, split_holdout, transform};
use honest_rag::embedding::RemoteEmbedder;
use honest_rag::gateway::{HttpChatBackend, ScriptSet};
use honest_rag::router::{branch_histogram, OutcomeRecord};
use honest_rag::scorer::{Metrics, Outcome, TABLE_COLUMNS};
use honest_rag::synthetic::{self, SyntheticConfig};
use honest_rag::{
    judge, score_batch, Branch, ChatBackend, EmbeddingProvider, HashEmbedder, QueryRecord, Router, Scorecard,
    ScriptedBackend,
};
use serde::{Deserialize, Serialize};

use crate::config::{require_backend, require_dataset, BackendKind, EmbeddingKind, RunConfig};
use crate::CliError;

pub const OUTCOMES_FILE: &str = "outcomes.jsonl";
pub const REPORT_FILE: &str = "report.json";
/// Share of unjoinable outcomes above which `score` fails.
pub const MAX_UNJOINABLE_FRACTION: f64 = 0.10;

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_records(path: &Path, strict: bool) -> Result<Vec<QueryRecord>, CliError> {
    load_dataset_with(path, LoadOptions { strict }).map_err(|err| match err {
        CorpusError::Io { source, .. } => CliError::Read {
            path: path.to_path_buf(),
            source,
        },
        source => CliError::Dataset {
            path: path.to_path_buf(),
            source,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrepSummary {
    pub train: usize,
    pub test: usize,
    pub replaced: usize,
}

/// Split off the held-out test set, rewrite the training answers and write
/// `train.jsonl`, `manifest.json` and `test.jsonl`.
pub fn prepare_data(cfg: &RunConfig) -> Result<PrepSummary, CliError> {
    let dataset = require_dataset(cfg)?;
    let records = load_records(dataset, cfg.strict)?;
    let (train, test) = split_holdout(&records, cfg.holdout, cfg.seed).map_err(|e| CliError::Invalid(e.to_string()))?;
    let examples: Vec<_> = train.iter().map(transform).collect();
    emit_training_files(&examples, &cfg.output_dir).map_err(|e| match e {
        honest_rag::dataset_prep::PrepError::Io { path, source } => CliError::Write {
            path: path.into(),
            source,
        },
        other => CliError::Invalid(other.to_string()),
    })?;
    let test_path = cfg.output_dir.join("test.jsonl");
    synthetic::write_fixture(&test, &test_path).map_err(|source| CliError::Write {
        path: test_path,
        source,
    })?;
    Ok(PrepSummary {
        train: examples.len(),
        test: test.len(),
        replaced: examples.iter().filter(|e| e.replaced).count(),
    })
}

type BackendPair = (Arc<dyn ChatBackend>, Arc<dyn ChatBackend>);

fn chat_backends(cfg: &RunConfig) -> Result<BackendPair, CliError> {
    require_backend(cfg)?;
    match cfg.backend {
        BackendKind::Scripted => {
            let path = cfg.script_path.as_deref().expect("checked by require_backend");
            let set = ScriptSet::load(path).map_err(|source| CliError::Read {
                path: path.to_path_buf(),
                source,
            })?;
            Ok((
                Arc::new(ScriptedBackend::from_script(&set.rag)),
                Arc::new(ScriptedBackend::from_script(&set.finetuned)),
            ))
        }
        BackendKind::Remote => {
            let url = cfg.backend_url.as_deref().expect("checked by require_backend");
            let timeout = Duration::from_millis(cfg.timeout_ms);
            let make = |model: &str| -> Result<Arc<dyn ChatBackend>, CliError> {
                HttpChatBackend::new(url, model, timeout)
                    .map(|b| Arc::new(b) as Arc<dyn ChatBackend>)
                    .map_err(|e| CliError::Invalid(e.to_string()))
            };
            Ok((make(&cfg.rag_model)?, make(&cfg.finetuned_model)?))
        }
    }
}

fn embedding_provider(cfg: &RunConfig) -> Result<Arc<dyn EmbeddingProvider>, CliError> {
    let e = &cfg.embedding;
    let invalid = |m: String| CliError::Invalid(m);
    match e.provider {
        EmbeddingKind::Hash => Ok(Arc::new(
            HashEmbedder::new(e.dimension).map_err(|err| invalid(err.to_string()))?,
        )),
        EmbeddingKind::Remote => {
            let url = e
                .url
                .as_deref()
                .ok_or_else(|| invalid("embedding.provider \"remote\" needs embedding.url".into()))?;
            let timeout = Duration::from_millis(cfg.timeout_ms);
            Ok(Arc::new(
                RemoteEmbedder::new(url, e.model.as_str(), e.dimension, timeout)
                    .map_err(|err| invalid(err.to_string()))?,
            ))
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub outcomes_path: PathBuf,
    pub total: usize,
    pub failures: usize,
    pub histogram: BTreeMap<Branch, usize>,
}

/// Route every dataset question and write one outcome per line.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    let dataset = require_dataset(cfg)?;
    let (rag, finetuned) = chat_backends(cfg)?;
    let records = load_records(dataset, cfg.strict)?;
    let mut router = Router::new(rag, finetuned, embedding_provider(cfg)?, cfg.pruner).with_mode(cfg.mode);
    router.params = cfg.params.clone();
    let outcomes = router.run_batch(&records, cfg.parallelism);

    let mut lines = String::new();
    for o in &outcomes {
        let line = serde_json::to_string(&o.to_record()).expect("outcome record serializes");
        lines.push_str(&line);
        lines.push('\n');
    }
    create_dir(&cfg.output_dir)?;
    let outcomes_path = cfg.output_dir.join(OUTCOMES_FILE);
    write_file(&outcomes_path, &lines)?;
    Ok(RunSummary {
        outcomes_path,
        total: outcomes.len(),
        failures: outcomes.iter().filter(|o| o.error.is_some()).count(),
        histogram: branch_histogram(&outcomes),
    })
}

pub fn load_outcomes(path: &Path) -> Result<Vec<OutcomeRecord>, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Malformed {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRow {
    pub interaction_id: String,
    pub domain: Domain,
    pub branch: Branch,
    pub outcome: Outcome,
    pub points: f64,
    pub exact: bool,
}

/// Machine-readable result of `score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub label: String,
    pub scorecard: Scorecard,
    pub branches: BTreeMap<Branch, usize>,
    pub unjoinable_ids: Vec<String>,
    /// Dataset records with no outcome; not scored.
    pub missing_outcomes: usize,
    pub verdicts: Vec<VerdictRow>,
}

#[derive(Debug, Clone)]
pub struct ScoreSummary {
    pub report: Report,
    pub report_path: PathBuf,
    pub total_outcomes: usize,
}

impl ScoreSummary {
    /// Fails when more than 10% of the outcomes could not be joined.
    pub fn join_status(&self) -> Result<(), CliError> {
        let unjoinable = self.report.unjoinable_ids.len();
        if unjoinable as f64 > MAX_UNJOINABLE_FRACTION * self.total_outcomes as f64 {
            Err(CliError::Unjoinable {
                unjoinable,
                total: self.total_outcomes,
            })
        } else {
            Ok(())
        }
    }
}

/// Join outcomes to ground truth by id, judge them and write `report.json`.
pub fn score(cfg: &RunConfig, outcomes_path: &Path, label: &str) -> Result<ScoreSummary, CliError> {
    let dataset = require_dataset(cfg)?;
    let records = load_records(dataset, cfg.strict)?;
    let outcomes = load_outcomes(outcomes_path)?;
    let by_id: HashMap<&str, &QueryRecord> = records.iter().map(|r| (r.interaction_id.as_str(), r)).collect();

    let mut batch = Vec::new();
    let mut rows = Vec::new();
    let mut unjoinable_ids = Vec::new();
    let mut branches: BTreeMap<Branch, usize> = Branch::ALL.iter().map(|b| (*b, 0)).collect();
    for o in &outcomes {
        let Some(record) = by_id.get(o.interaction_id.as_str()) else {
            unjoinable_ids.push(o.interaction_id.clone());
            continue;
        };
        let verdict = judge(&o.final_answer, &record.answer, &record.alt_answers, cfg.scoring_mode)
            .with_id(o.interaction_id.as_str());
        *branches.entry(o.branch).or_default() += 1;
        rows.push(VerdictRow {
            interaction_id: o.interaction_id.clone(),
            domain: record.domain,
            branch: o.branch,
            outcome: verdict.outcome,
            points: verdict.points,
            exact: verdict.exact,
        });
        batch.push((verdict, record.domain));
    }
    let joined: std::collections::HashSet<&str> = rows.iter().map(|r| r.interaction_id.as_str()).collect();
    let missing_outcomes = records
        .iter()
        .filter(|r| !joined.contains(r.interaction_id.as_str()))
        .count();

    let scorecard = match score_batch(&batch, cfg.scoring_mode) {
        Ok(card) => card,
        Err(_) => {
            return Err(CliError::Unjoinable {
                unjoinable: unjoinable_ids.len(),
                total: outcomes.len(),
            })
        }
    };
    let report = Report {
        label: label.to_string(),
        scorecard,
        branches,
        unjoinable_ids,
        missing_outcomes,
        verdicts: rows,
    };
    create_dir(&cfg.output_dir)?;
    let report_path = cfg.output_dir.join(REPORT_FILE);
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    write_file(&report_path, &json)?;
    Ok(ScoreSummary {
        report,
        report_path,
        total_outcomes: outcomes.len(),
    })
}

pub fn load_report(path: &Path) -> Result<Report, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Malformed {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// One row per report, micro-averaged, in the order given.
pub fn comparison_table(reports: &[Report]) -> String {
    let width = reports.iter().map(|r| r.label.len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "");
    for col in TABLE_COLUMNS {
        let _ = write!(out, " | {col:>14}");
    }
    let _ = writeln!(out, " | {:>5}", "n");
    for r in reports {
        let m: &Metrics = &r.scorecard.micro;
        let _ = write!(out, "{:<width$}", r.label);
        for v in [m.exact_accuracy, m.accuracy, m.hallucination, m.missing, m.total_score] {
            let _ = write!(out, " | {v:>14.3}");
        }
        let _ = writeln!(out, " | {:>5}", m.n);
    }
    out
}

/// Write the synthetic benchmark fixture and its scripts into `out_dir`.
pub fn generate_fixture(out_dir: &Path, cfg: &SyntheticConfig) -> Result<(PathBuf, PathBuf), CliError> {
    create_dir(out_dir)?;
    let bench = synthetic::generate(cfg);
    let fixture = out_dir.join("fixture.jsonl");
    let scripts = out_dir.join("scripts.json");
    bench.write_fixture(&fixture).map_err(|source| CliError::Write {
        path: fixture.clone(),
        source,
    })?;
    bench.write_scripts(&scripts).map_err(|source| CliError::Write {
        path: scripts.clone(),
        source,
    })?;
    Ok((fixture, scripts))
}
