//! Experiment runner: sweeps coupling strength, scheme and code width over
//! the cooperative authentication pipeline and writes results CSV, trained
//! bundles and a summary plot.
//!
//! Exit codes: 0 on success, 1 for configuration or setup problems, 2 when
//! the sweep finished but some cells failed.

mod config;
mod plot;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{has_errors, load_config};

#[derive(Parser)]
#[command(
    name = "uwan-auth",
    version,
    about = "Cooperative physical-layer authentication experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep: datasets, training, evaluation, artifacts.
    Run {
        /// Experiment config (TOML); an empty file runs the default sweep.
        config: PathBuf,
        /// Output directory, overriding the configured one.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dataset groups trained in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Offset added to every configured seed (wrapping).
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
    },
    /// Check a config file and list every problem without running.
    Validate {
        /// Experiment config (TOML).
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            jobs,
            seed_offset,
        } => run_command(&config, out, jobs, seed_offset),
        Command::Validate { config } => validate_command(&config),
    }
}

fn validate_command(path: &PathBuf) -> ExitCode {
    let (_, diags) = match load_config(path) {
        Ok(loaded) => loaded,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    for diag in &diags {
        eprintln!("{diag}");
    }
    if has_errors(&diags) {
        ExitCode::from(1)
    } else {
        let warnings = diags.len();
        println!("{}: valid ({warnings} warnings)", path.display());
        ExitCode::SUCCESS
    }
}

fn run_command(path: &PathBuf, out: Option<PathBuf>, jobs: usize, seed_offset: u64) -> ExitCode {
    let (mut config, diags) = match load_config(path) {
        Ok(loaded) => loaded,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    for diag in &diags {
        eprintln!("{diag}");
    }
    if has_errors(&diags) {
        eprintln!("configuration rejected; fix the errors above");
        return ExitCode::from(1);
    }
    if let Some(out) = out {
        config.output_dir = out;
    }
    if seed_offset != 0 {
        for seed in &mut config.seeds {
            *seed = seed.wrapping_add(seed_offset);
        }
    }

    let summary = match runner::run(&config, jobs) {
        Ok(summary) => summary,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    println!(
        "{} result rows -> {}",
        summary.rows.len(),
        summary.csv_path.display()
    );
    println!("summary plot -> {}", summary.plot_path.display());
    if summary.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} cells failed:", summary.failures.len());
        for f in &summary.failures {
            eprintln!(
                "  {} M={} alpha={} seed={}: {}",
                f.scheme, f.m, f.alpha, f.seed, f.message
            );
        }
        ExitCode::from(2)
    }
}
