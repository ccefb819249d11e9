// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use socialml::experiment::{run, Command, Overrides};

/// Social machine learning experiments: train agent classifiers, run
/// social-learning prediction, Monte Carlo error curves and theory reports.
#[derive(Parser)]
#[command(name = "socialml", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train every agent's classifier and write risk traces and models.
    Train(Opts),
    /// Run the prediction phase and write the belief trajectory.
    Predict(Opts),
    /// Estimate per-step error rates over independent replications.
    Montecarlo(Opts),
    /// Write the theory report (exponent curves and consistency bound).
    Theory(Opts),
    /// Check the data source and graph without training.
    ValidateData(Opts),
}

#[derive(Args)]
struct Opts {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed replacing the config's `seed`.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Monte Carlo replication count replacing the config's.
    #[arg(long)]
    replications_override: Option<usize>,
    /// Worker threads for replication-level parallelism.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, opts) = match cli.command {
        Cmd::Train(o) => (Command::Train, o),
        Cmd::Predict(o) => (Command::Predict, o),
        Cmd::Montecarlo(o) => (Command::MonteCarlo, o),
        Cmd::Theory(o) => (Command::Theory, o),
        Cmd::ValidateData(o) => (Command::ValidateData, o),
    };
    let overrides = Overrides {
        out: opts.out,
        seed: opts.seed_override,
        replications: opts.replications_override,
    };
    match run(command, &opts.config, &overrides, opts.threads) {
        Ok(manifest) => {
            println!("{}: wrote {} files", command.name(), manifest.files.len());
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("socialml {}: {f}", command.name());
            ExitCode::from(f.exit_code())
        }
    }
}
