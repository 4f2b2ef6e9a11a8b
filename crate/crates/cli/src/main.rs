use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use honest_rag::synthetic::SyntheticConfig;
use honest_rag_cli::commands::{self, OUTCOMES_FILE};
use honest_rag_cli::{CliError, ConfigArgs};
use tracing_subscriber::EnvFilter;

/// Hybrid RAG / fine-tuned question answering: data prep, runs, scoring.
#[derive(Debug, Parser)]
#[command(name = "honest-rag", version)]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split off the test set and write fine-tuning data plus the trainer manifest.
    PrepareData,
    /// Route every question and write outcomes.jsonl.
    Run,
    /// Judge outcomes against the dataset and write report.json.
    Score {
        /// Outcomes file [default: <out>/outcomes.jsonl]
        #[arg(long)]
        outcomes: Option<PathBuf>,
        /// Row label in the printed table
        #[arg(long, default_value = "run")]
        label: String,
    },
    /// Print a comparison table from one or more report.json files.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Print the micro metrics as JSON instead of a table
        #[arg(long)]
        json: bool,
    },
    /// Write the synthetic benchmark fixture and matching scripts.
    GenerateFixture {
        #[arg(long, default_value_t = 300)]
        records: usize,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = cli.config.resolve()?;
    match cli.command {
        Command::PrepareData => {
            let s = commands::prepare_data(&cfg)?;
            println!("train={} test={} replaced={}", s.train, s.test, s.replaced);
        }
        Command::Run => {
            let s = commands::run(&cfg)?;
            for (branch, count) in &s.histogram {
                println!("{branch}={count}");
            }
            if s.failures > 0 {
                eprintln!(
                    "warning: {} of {} questions failed and were answered \"i don't know\"",
                    s.failures, s.total
                );
            }
            println!("wrote {} outcomes to {}", s.total, s.outcomes_path.display());
        }
        Command::Score { outcomes, label } => {
            let outcomes = outcomes.unwrap_or_else(|| cfg.output_dir.join(OUTCOMES_FILE));
            let s = commands::score(&cfg, &outcomes, &label)?;
            let unjoinable = &s.report.unjoinable_ids;
            if !unjoinable.is_empty() {
                eprintln!(
                    "warning: {} unjoinable ids skipped: {}",
                    unjoinable.len(),
                    unjoinable.join(", ")
                );
            }
            if s.report.missing_outcomes > 0 {
                eprintln!("warning: {} dataset records have no outcome", s.report.missing_outcomes);
            }
            print!("{}", s.report.scorecard.to_table(&label));
            println!("wrote {}", s.report_path.display());
            s.join_status()?;
        }
        Command::Report { reports, json } => {
            let loaded = reports
                .iter()
                .map(|p| commands::load_report(p))
                .collect::<Result<Vec<_>, _>>()?;
            if json {
                let rows: Vec<_> = loaded
                    .iter()
                    .map(|r| serde_json::json!({"label": r.label, "metrics": r.scorecard.micro}))
                    .collect();
                println!(
                    "{}",
                    serde_json::to_string_pretty(&rows).expect("report rows serialize")
                );
            } else {
                print!("{}", commands::comparison_table(&loaded));
            }
        }
        Command::GenerateFixture { records } => {
            let syn = SyntheticConfig {
                records,
                seed: cfg.seed,
                dimension: cfg.embedding.dimension,
            };
            let (fixture, scripts) = commands::generate_fixture(&cfg.output_dir, &syn)?;
            println!("wrote {} and {}", fixture.display(), scripts.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
