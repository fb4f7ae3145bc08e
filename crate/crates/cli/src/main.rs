//! `mcn`: dataset synthesis, training, SLAM runs, completion, evaluation
//! and rendering from one binary.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::UsageError;

#[derive(Parser, Debug)]
#[command(name = "mcn", version, about = "Occupancy-grid SLAM with learned map completion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// JSON config file layered over the defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config value, e.g. `--set adam.lr=0.001`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a dataset of (partial, full) map pairs.
    GenData(commands::GenDataArgs),
    /// Train a completion network on a dataset.
    Train(commands::TrainArgs),
    /// Run one simulated SLAM episode.
    Slam(commands::SlamArgs),
    /// Complete a partial map (PGM) with a trained generator.
    Complete(commands::CompleteArgs),
    /// Score completion on a dataset's test split.
    Eval1(commands::Eval1Args),
    /// Score completion of SLAM maps after one scan and near full coverage.
    Eval2(commands::Eval2Args),
    /// Convert a PGM map to PNG.
    Render(commands::RenderArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            eprintln!("run `mcn --help` for usage");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
