//! Experiment runner behind the `stablelike` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod kernel_spec;
pub mod output;

use std::path::PathBuf;

use commands::{execute, Plan};
use config::{Command, ExperimentConfig};
use error::CliError;
use output::{create_dir, emit_summary, to_json, unix_now, write_command, write_file, CommandOutput, Meta};

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: PathBuf,
    pub quick: bool,
}

/// Runs `command` (every suite for `verify-all`) and writes its outputs.
/// Returns whether every check passed. Nothing is written unless all
/// configurations resolve.
pub fn run(command: Command, base: &ExperimentConfig, opts: &RunOptions) -> Result<bool, CliError> {
    let started = unix_now();
    let commands: Vec<Command> = match command {
        Command::VerifyAll => Command::SUITES.to_vec(),
        c => vec![c],
    };
    let plans = commands
        .iter()
        .map(|&c| Plan::new(c, base, opts.quick))
        .collect::<Result<Vec<_>, _>>()?;

    create_dir(&opts.out)?;
    let mut files = Vec::new();
    let mut all = Vec::new();
    for plan in &plans {
        eprintln!("running {}", plan.command);
        let reports = execute(plan, Some(&opts.out))?;
        for r in &reports {
            eprintln!("  {:<40} {}", r.check_name, if r.pass { "PASS" } else { "FAIL" });
        }
        let out = CommandOutput::new(plan.command, plan.config.clone(), reports);
        files.extend(write_command(&opts.out, &out)?);
        all.extend(out.reports);
    }
    let pass = all.iter().all(|r| r.pass);
    if command == Command::VerifyAll {
        let combined = CommandOutput::new(command, base.clone(), all.clone());
        let path = opts.out.join("verify-all.json");
        write_file(&path, to_json(&combined)?.as_bytes())?;
        files.push(path);
    }
    let summary = opts.out.join("summary.csv");
    write_file(&summary, emit_summary(&all)?.as_bytes())?;
    files.push(summary);

    let finished = unix_now();
    let meta = Meta {
        version: env!("CARGO_PKG_VERSION"),
        command,
        started_unix: started,
        finished_unix: finished,
        elapsed_seconds: finished - started,
        threads: rayon::current_num_threads(),
        files: files.iter().map(|p| p.display().to_string()).collect(),
    };
    write_file(&opts.out.join("meta.json"), to_json(&meta)?.as_bytes())?;
    Ok(pass)
}
