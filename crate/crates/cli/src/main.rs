use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use stablelike_cli::config::{Command, ExperimentConfig};
use stablelike_cli::error::{CliError, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS};
use stablelike_cli::{run, RunOptions};

/// Simulate and verify stable-like jump processes.
#[derive(Debug, Parser)]
#[command(name = "stablelike", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Reduced sample and replica counts.
    #[arg(long)]
    quick: bool,
    /// Override a config value, e.g. `--set sim.dt=5e-4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main_inner(args: Args) -> Result<bool, CliError> {
    let mut config = ExperimentConfig::load(args.config.as_deref(), &args.overrides)?;
    if let Some(seed) = args.seed {
        config.sim.seed = seed;
    }
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    run(
        args.command,
        &config,
        &RunOptions {
            out: args.out,
            quick: args.quick,
        },
    )
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG as u8) } else { ExitCode::SUCCESS };
        }
    };
    match main_inner(args) {
        Ok(true) => ExitCode::from(EXIT_PASS as u8),
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(EXIT_FAIL as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
