//! `grandlab`: batch runner for grand-norm, maximal-operator, and
//! weight-class scenarios. One JSON config per invocation; reports land in
//! the configured output directory. Exit code 0 means every checked property
//! held, 1 means a verification failed (the report is still written), and 2
//! means the config was rejected.

mod config;
mod scenarios;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use grandlab_core::grid::catalog_entries;

use config::ScenarioConfig;

#[derive(Parser)]
#[command(
    name = "grandlab",
    version,
    about = "Desk-scale experiments for grand Lebesgue norms and maximal operators",
    long_about = "Runs one configured scenario per invocation and writes JSON/CSV \
reports. Thread count follows RAYON_NUM_THREADS; reports are deterministic \
for a fixed config and seed."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the scenario described by a JSON config file.
    Run { config: PathBuf },
    /// List the built-in test functions and weights.
    Catalog {
        /// Emit the catalog as a JSON array instead of aligned text.
        #[arg(long)]
        json: bool,
    },
    /// Time brute-force against fast maximal paths and check comparability.
    Bench { config: PathBuf },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch() -> Result<bool> {
    match Cli::parse().command {
        Command::Run { config } => scenarios::run(&ScenarioConfig::load(&config)?),
        Command::Catalog { json } => {
            print_catalog(json)?;
            Ok(true)
        }
        Command::Bench { config } => scenarios::bench_entry(&ScenarioConfig::load(&config)?),
    }
}

fn print_catalog(as_json: bool) -> Result<()> {
    use std::io::Write;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut entries = catalog_entries();
    entries.sort_by_key(|e| e.name);
    let result = if as_json {
        writeln!(out, "{}", serde_json::to_string_pretty(&entries)?)
    } else {
        let width = entries.iter().map(|e| e.name.len()).max().unwrap_or(0);
        entries.iter().try_for_each(|e| {
            writeln!(
                out,
                "{:width$}  params {}  {}  ({})",
                e.name, e.params, e.formula, e.smooth
            )
        })
    };
    match result {
        // A closed pipe (catalog | head) is the reader's choice, not an error.
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}
