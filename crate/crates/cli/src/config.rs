//! Run configuration: defaults, `honest-rag.toml`, environment, flags.

use std::path::{Path, PathBuf};

use clap::Args;
use honest_rag::gateway::DecodeParams;
use honest_rag::router::RouterMode;
use honest_rag::{PrunerConfig, ScoringMode};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Config file picked up from the working directory when `--config` is absent.
pub const DEFAULT_CONFIG_FILE: &str = "honest-rag.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Scripted,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    #[default]
    Hash,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub provider: EmbeddingKind,
    pub dimension: usize,
    pub url: Option<String>,
    pub model: String,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            provider: EmbeddingKind::Hash,
            dimension: 256,
            url: None,
            model: "embedding".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub pruner: PrunerConfig,
    pub scoring_mode: ScoringMode,
    pub parallelism: usize,
    pub backend: BackendKind,
    pub script_path: Option<PathBuf>,
    pub backend_url: Option<String>,
    pub timeout_ms: u64,
    pub rag_model: String,
    pub finetuned_model: String,
    pub seed: u64,
    pub holdout: usize,
    pub strict: bool,
    pub mode: RouterMode,
    pub embedding: EmbeddingConfig,
    pub params: DecodeParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_path: None,
            output_dir: PathBuf::from("out"),
            pruner: PrunerConfig::default(),
            scoring_mode: ScoringMode::FullWeight,
            parallelism: 1,
            backend: BackendKind::Scripted,
            script_path: None,
            backend_url: None,
            timeout_ms: 30_000,
            rag_model: "rag".into(),
            finetuned_model: "finetuned".into(),
            seed: 2024,
            holdout: honest_rag::dataset_prep::DEFAULT_HOLDOUT,
            strict: false,
            mode: RouterMode::Hybrid,
            embedding: EmbeddingConfig::default(),
            params: DecodeParams::new(),
        }
    }
}

/// Parse a snake_case label through the type's serde representation.
pub fn parse_label<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

/// Flags shared by every command that reads configuration. Unset flags
/// leave the config-file value in place.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Config file [default: ./honest-rag.toml if present]
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dataset fixture (JSON lines)
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// crag_half or full_weight
    #[arg(long, global = true, value_parser = parse_label::<ScoringMode>)]
    pub scoring_mode: Option<ScoringMode>,
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// scripted or remote
    #[arg(long, global = true, value_parser = parse_label::<BackendKind>)]
    pub backend: Option<BackendKind>,
    /// Script file for the scripted backend
    #[arg(long, global = true)]
    pub script: Option<PathBuf>,
    #[arg(long, global = true, env = "HONEST_RAG_BACKEND_URL")]
    pub backend_url: Option<String>,
    #[arg(long, global = true, env = "HONEST_RAG_TIMEOUT_MS")]
    pub timeout_ms: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub holdout: Option<usize>,
    /// Reject unknown fixture keys
    #[arg(long, global = true)]
    pub strict: bool,
    /// hybrid or finetuned_only
    #[arg(long, global = true, value_parser = parse_label::<RouterMode>)]
    pub mode: Option<RouterMode>,
    #[arg(long, global = true)]
    pub top_k: Option<usize>,
    #[arg(long, global = true)]
    pub expand_m: Option<usize>,
    /// Similarity threshold for the pruner gate
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true)]
    pub max_context_chars: Option<usize>,
}

impl ConfigArgs {
    /// Resolve the configuration: defaults, then the config file, then
    /// environment and flags.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None if Path::new(DEFAULT_CONFIG_FILE).is_file() => load_config(Path::new(DEFAULT_CONFIG_FILE))?,
            None => RunConfig::default(),
        };
        self.apply(&mut cfg);
        validate(&cfg)?;
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut RunConfig) {
        fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
            if let Some(v) = value {
                *slot = v.clone();
            }
        }
        if self.dataset.is_some() {
            cfg.dataset_path = self.dataset.clone();
        }
        set(&mut cfg.output_dir, &self.out);
        set(&mut cfg.scoring_mode, &self.scoring_mode);
        set(&mut cfg.parallelism, &self.parallelism);
        set(&mut cfg.backend, &self.backend);
        if self.script.is_some() {
            cfg.script_path = self.script.clone();
        }
        if self.backend_url.is_some() {
            cfg.backend_url = self.backend_url.clone();
        }
        set(&mut cfg.timeout_ms, &self.timeout_ms);
        set(&mut cfg.seed, &self.seed);
        set(&mut cfg.holdout, &self.holdout);
        cfg.strict |= self.strict;
        set(&mut cfg.mode, &self.mode);
        set(&mut cfg.pruner.top_k, &self.top_k);
        set(&mut cfg.pruner.expand_m, &self.expand_m);
        set(&mut cfg.pruner.threshold_n, &self.threshold);
        set(&mut cfg.pruner.max_context_chars, &self.max_context_chars);
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text).map_err(|message| CliError::Config {
        path: path.to_path_buf(),
        message,
    })
}

pub fn parse_config(text: &str) -> Result<RunConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    let invalid = |m: String| Err(CliError::Invalid(m));
    if cfg.parallelism == 0 {
        return invalid("parallelism must be at least 1".into());
    }
    if cfg.timeout_ms == 0 {
        return invalid("timeout_ms must be positive".into());
    }
    if cfg.embedding.dimension < 2 {
        return invalid("embedding.dimension must be at least 2".into());
    }
    cfg.pruner.validate().map_err(|e| CliError::Invalid(e.to_string()))
}

/// Backend settings are only required by commands that call models.
pub fn require_backend(cfg: &RunConfig) -> Result<(), CliError> {
    match cfg.backend {
        BackendKind::Scripted if cfg.script_path.is_none() => Err(CliError::Invalid(
            "backend \"scripted\" needs script_path (--script)".into(),
        )),
        BackendKind::Remote if cfg.backend_url.is_none() => Err(CliError::Invalid(
            "backend \"remote\" needs backend_url (--backend-url or HONEST_RAG_BACKEND_URL)".into(),
        )),
        _ => Ok(()),
    }
}

pub fn require_dataset(cfg: &RunConfig) -> Result<&Path, CliError> {
    cfg.dataset_path
        .as_deref()
        .ok_or_else(|| CliError::Invalid("no dataset given (--dataset or dataset_path)".into()))
}
