//! Commands behind the `honest-rag` binary.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{ConfigArgs, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}", path = path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}", path = path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}", path = path.display())]
    Config { path: PathBuf, message: String },
    #[error("{path}: {source}", path = path.display())]
    Dataset {
        path: PathBuf,
        #[source]
        source: honest_rag::corpus::CorpusError,
    },
    #[error("{path}: {message}", path = path.display())]
    Malformed { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{unjoinable} of {total} outcomes have no matching dataset record")]
    Unjoinable { unjoinable: usize, total: usize },
}

impl CliError {
    /// 1 for a failed join check, 2 for configuration and IO problems.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Unjoinable { .. } => 1,
            _ => 2,
        }
    }
}
