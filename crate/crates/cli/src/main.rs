//! Experiment front end for the zo-minimax solvers.
//!
//! `run` executes one configured experiment and writes a reproducible CSV
//! trace; `compare` reports the query count at which each trace reaches a
//! target loss. Exit codes: 0 on success, 2 for configuration or schema
//! problems, 3 when the black-box oracle failed mid-run (the partial CSV
//! remains valid), 1 for I/O errors.

mod compare;
mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "zo-minimax", version, about = "Gradient-free minimax optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a key=value config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Master seed; every random stream derives from it.
        #[arg(long)]
        seed: Option<u64>,
        /// Algorithm: zo-vrgda, zo-isarah, zo-sgda or zo-sgdmsa.
        #[arg(long)]
        algo: Option<String>,
        /// Parameter profile: theory or practical.
        #[arg(long)]
        profile: Option<String>,
        /// Query budget; the run stops at the budget or at T.
        #[arg(long)]
        budget: Option<u64>,
        /// Trace output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// For each trace, report the smallest query count reaching the target.
    Compare {
        #[arg(long)]
        target: f64,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            algo,
            profile,
            budget,
            out,
        } => {
            let cfg = match config::load(
                &config,
                config::Overrides {
                    seed,
                    algo,
                    profile,
                    budget,
                    out,
                },
            ) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            match runner::run_experiment(&cfg) {
                Ok(summary) => {
                    eprintln!(
                        "done: {} rows, {} queries ({} evaluation queries), output index {}",
                        summary.rows,
                        summary.total_queries,
                        summary.eval_queries,
                        summary
                            .output_index
                            .map(|i| i.to_string())
                            .unwrap_or_else(|| "-".into()),
                    );
                    ExitCode::SUCCESS
                }
                Err(runner::RunError::Config(msg)) => {
                    eprintln!("config error: {msg}");
                    ExitCode::from(2)
                }
                Err(runner::RunError::Oracle(msg)) => {
                    eprintln!("oracle failure: {msg} (partial trace kept)");
                    ExitCode::from(3)
                }
                Err(runner::RunError::Io(e)) => {
                    eprintln!("io error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Compare { target, files } => {
            let mut results = Vec::new();
            for f in &files {
                match compare::queries_to_target(f, target) {
                    Ok(r) => results.push(r),
                    Err(compare::CompareError::Schema(msg)) => {
                        eprintln!("schema mismatch: {msg}");
                        return ExitCode::from(2);
                    }
                    Err(compare::CompareError::Io(msg)) => {
                        eprintln!("io error: {msg}");
                        return ExitCode::from(1);
                    }
                }
            }
            print!("{}", compare::render_table(&results));
            ExitCode::SUCCESS
        }
    }
}
