//! `mkdv-lab`: runs a JSON-configured experiment and writes its outputs.
//!
//! Exit status: 0 when every check passes, 1 when a check fails (or the run
//! aborts), 2 for configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mkdv_core::config::RunConfig;
use mkdv_core::experiments;
use mkdv_core::Error;

#[derive(Parser)]
#[command(name = "mkdv-lab", version, about = "Truncated mKdV Monte Carlo laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Worker threads (overrides the config).
        #[arg(long)]
        workers: Option<usize>,
        /// Output root (overrides `output_dir` and `$MKDV_LAB_OUT`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
    },
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
    let Command::Run {
        config,
        workers,
        out,
        seed,
    } = cli.command;

    let mut cfg = match RunConfig::from_path(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(w) = workers {
        cfg.workers = w;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("config error: {e}");
        return ExitCode::from(2);
    }
    let root = cfg.output_root(out.as_deref());

    match experiments::run(&cfg, &root) {
        Ok(run) => {
            for c in &run.outcome.result.checks {
                eprintln!(
                    "[{}] {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            eprintln!("wrote {} ({:.2} s)", run.dir.display(), run.wall_clock);
            println!("{}", run.dir.display());
            if run.outcome.result.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Error::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            ExitCode::from(1)
        }
    }
}
