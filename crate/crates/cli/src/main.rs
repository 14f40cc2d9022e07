//! `scalesgd` command-line front end.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Context;
use config::{Command, ExperimentConfig, GeneratorSpec};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "scalesgd", version, about = "Parallel SGD scalability experiments")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the run seed and the generator seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Concurrent sweep points.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Overrides `output_dir` from the config.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Root for relative dataset paths.
    #[arg(long, global = true, env = "SCALESGD_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Generate a dataset and write it in svmlight format.
    Gen,
    /// Print the character report of a dataset.
    Metrics,
    /// Run one training and write its trace.
    Train,
    /// Run a worker-count sweep and write gain growth and upper-bound reports.
    Sweep,
}

fn apply_seed(cfg: &mut ExperimentConfig, seed: u64) {
    if let Some(run) = cfg.run.as_mut() {
        run.seed = seed;
    }
    match cfg.dataset.as_mut().and_then(|d| d.generator.as_mut()) {
        Some(GeneratorSpec::Uniform { seed: s, .. }) => *s = seed,
        Some(GeneratorSpec::Stream { spec, .. }) => spec.seed = seed,
        _ => {}
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let path = cli.config.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut config = ExperimentConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        apply_seed(&mut config, seed);
    }
    if cli.jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let cmd = match cli.command {
        Sub::Gen => Command::Gen,
        Sub::Metrics => Command::Metrics,
        Sub::Train => Command::Train,
        Sub::Sweep => Command::Sweep,
    };
    config.validate(cmd)?;
    let ctx = Context { config, data_dir: cli.data_dir, output_dir: cli.output_dir, jobs: cli.jobs };
    match cmd {
        Command::Gen => commands::cmd_gen(&ctx),
        Command::Metrics => commands::cmd_metrics(&ctx),
        Command::Train => commands::cmd_train(&ctx),
        Command::Sweep => commands::cmd_sweep(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("scalesgd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
