//! `prognoses` — longitudinal multi-view prognostic modeling CLI.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 input/schema error.

mod commands;
mod config;
mod exhibits;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verbosity {
    Error,
    Warn,
    Info,
    Debug,
}

impl Verbosity {
    fn parse(s: &str) -> Result<Verbosity, String> {
        match s {
            "error" => Ok(Verbosity::Error),
            "warn" => Ok(Verbosity::Warn),
            "info" => Ok(Verbosity::Info),
            "debug" => Ok(Verbosity::Debug),
            other => Err(format!("expected error|warn|info|debug, got {other:?}")),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "prognoses",
    version,
    about = "Longitudinal multi-view prognostic modeling: cohort validation, synthetic cohorts, nested-CV experiments, ablation grids, and importance exports"
)]
struct Cli {
    /// Seed override (wins over PROGNOSES_SEED and the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel cell workers for `ablate`.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Log verbosity: error|warn|info|debug.
    #[arg(long, global = true, default_value = "info", value_parser = Verbosity::parse)]
    log_level: Verbosity,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a features/labels pair and print the cohort summary.
    Validate {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Feature source: tsm (512-d) or biomarker (38-d).
        #[arg(long, default_value = "tsm")]
        source: String,
    },
    /// Generate a synthetic cohort from a generator params file.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment config end to end.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the ablation grid and emit the exhibit tables.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate per-fold importance counts into a radar CSV.
    Importance {
        /// fold,feature_index,count CSV from a forest run.
        #[arg(long)]
        counts: PathBuf,
        /// feature_index,group_name CSV; defaults to the shipped
        /// placeholder grouping.
        #[arg(long)]
        grouping: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "split_nodes")]
        mode: String,
        /// Write the placeholder grouping CSV to this path and exit.
        #[arg(long)]
        emit_placeholder_grouping: Option<PathBuf>,
    },
}

/// Input/schema problems exit 2; runtime failures exit 1.
fn classify(err: &anyhow::Error) -> u8 {
    let text = format!("{err:#}");
    let schema_markers = [
        "parsing config",
        "reading config",
        "expected",
        "no records",
        "features line",
        "labels row",
        "label missing",
        "label present",
        "unknown view",
        "unknown source",
        "invalid experiment config",
        "invalid generator params",
        "counts row",
        "grouping",
        "does not match",
        "missing for",
        "day must be",
        "exhibits",
        "requires a",
    ];
    if schema_markers.iter().any(|m| text.contains(m)) {
        2
    } else {
        1
    }
}

fn effective_seed(flag: Option<u64>) -> Option<u64> {
    if flag.is_some() {
        return flag;
    }
    std::env::var("PROGNOSES_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = effective_seed(cli.seed);
    let result = match &cli.command {
        Command::Validate { features, labels, source } => {
            commands::cmd_validate(features, labels, source, cli.log_level)
        }
        Command::Synth { config, out } => commands::cmd_synth(config, out),
        Command::Run { config, out } => commands::cmd_run(config, out, seed, cli.log_level),
        Command::Ablate { config, out } => {
            commands::cmd_ablate(config, out, seed, cli.jobs, cli.log_level)
        }
        Command::Importance { counts, grouping, out, mode, emit_placeholder_grouping } => {
            if let Some(path) = emit_placeholder_grouping {
                commands::write_placeholder_grouping(path)
            } else {
                commands::cmd_importance(counts, grouping.as_deref(), out, mode)
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}
