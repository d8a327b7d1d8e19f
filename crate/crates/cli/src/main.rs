//! `simulate <config.json> [--seed S] [--trials T] [--workers W] [--out PATH]`
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ncmimo::experiment::{load_config, run_to_file, ExperimentConfig};
use ncmimo::Error;

#[derive(Debug, Parser)]
#[command(name = "simulate", version, about = "Run a near-field noncoherent detection experiment")]
struct Args {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Seed for both the scatterer and the symbol streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Symbol trials per scatterer draw.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (defaults to the available cores).
    #[arg(long, env = "NCMIMO_WORKERS")]
    workers: Option<usize>,
    /// Output CSV; defaults to the config's output_path, else the config
    /// path with a .csv extension.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output_path(args: &Args, config: &ExperimentConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| config.output_path.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| args.config.with_extension("csv"))
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let config = match load_config(&args.config).and_then(|c| c.with_overrides(args.seed, args.trials)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(if matches!(e, Error::Io(_)) || e.is_config_error() { 1 } else { 2 });
        }
    };
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        eprintln!("error: --workers must be >= 1");
        return ExitCode::from(1);
    }
    let out = output_path(&args, &config);
    match run_to_file(&config, workers, &out) {
        Ok(rows) => {
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
