//! `pathnas` experiment driver.

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "pathnas",
    version,
    about = "Fair supernet training and path-priority architecture search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a toy supernet with strictly fair sampling; prints checkpoint paths.
    TrainSupernet {
        config: PathBuf,
        /// Replace the config's seed list with this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from a checkpoint up to the configured macro-step count.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run the configured search method per seed; prints the report path.
    Search {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Tabulate two or more search reports over the same evaluator.
    Compare {
        reports: Vec<PathBuf>,
        /// Accepted for symmetry with the other commands; reports carry their seeds.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Search on the source landscape and score the pick on the target.
    Transfer {
        source: PathBuf,
        target: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate one architecture, given as comma-separated choice indices.
    EvalArch {
        config: PathBuf,
        architecture: String,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::TrainSupernet {
            config,
            seed,
            resume,
        } => {
            for path in commands::train_supernet(&config, seed, resume.as_deref())? {
                println!("{}", path.display());
            }
        }
        Command::Search { config, seed } => {
            println!("{}", commands::search(&config, seed)?.display())
        }
        Command::Compare { reports, seed: _ } => print!("{}", commands::compare(&reports)?),
        Command::Transfer {
            source,
            target,
            seed,
        } => {
            println!("{}", commands::transfer(&source, &target, seed)?.display())
        }
        Command::EvalArch {
            config,
            architecture,
            seed,
        } => {
            for line in commands::eval_arch(&config, &architecture, seed)? {
                println!("{line}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ")
                .to_string();
            let err = CliError::config(first);
            eprintln!("{}", err.to_line());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_line());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
