//! Command-line front end for `fragline`.
//!
//! `fragline <command> --config run.toml` reads a run configuration, applies
//! flag overrides, runs the command on a worker pool and writes its table and
//! summary. Exit status is 0 on success, 1 when a check fails and 2 on any
//! configuration or runtime error.

pub mod commands;
pub mod config;
pub mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::Parser;

pub use commands::{dispatch, CliError, Command, Outcome};
pub use config::{parse_config, ConfigError, Format, RunConfig};

/// Environment variable read when `--threads` is not given.
pub const THREADS_ENV: &str = "FRAGLINE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fragline", version, about = "Stopping lines of fragmentation processes")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, short)]
    pub config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `run.replicas`.
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Overrides `output.path`; standard output when neither is set.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `output.format`.
    #[arg(long, value_parser = ["csv", "json"])]
    pub format: Option<String>,
    /// Worker threads; falls back to FRAGLINE_THREADS, then to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Applies flag overrides and validates the result.
pub fn resolve(args: &Args) -> Result<RunConfig, ConfigError> {
    let mut cfg = config::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(r) = args.replicas {
        cfg.run.replicas = r;
    }
    if let Some(out) = &args.out {
        cfg.output.path = Some(out.clone());
    }
    match args.format.as_deref() {
        Some("json") => cfg.output.format = Format::Json,
        Some("csv") => cfg.output.format = Format::Csv,
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn threads(args: &Args) -> Result<usize, ConfigError> {
    if let Some(n) = args.threads {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| ConfigError::Validation {
            key: THREADS_ENV.to_string(),
            message: format!("expected a thread count, got `{v}`"),
        }),
        Err(_) => Ok(0),
    }
}

fn sink(path: &Option<PathBuf>, fallback: Box<dyn Write + Send>) -> io::Result<Box<dyn Write + Send>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => fallback,
    })
}

/// Runs the parsed command line and returns the process exit code.
pub fn run(args: &Args) -> u8 {
    match try_run(args) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if outcome.passed {
                0
            } else {
                eprintln!("check failed");
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn try_run(args: &Args) -> Result<Outcome, CliError> {
    let cfg = resolve(args)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads(args)?)
        .build()
        .map_err(|e| io::Error::other(e.to_string()))?;
    let mut out = sink(&cfg.output.path, Box::new(BufWriter::new(io::stdout())))?;
    let mut summary = sink(&cfg.output.summary, Box::new(io::stderr()))?;
    let outcome = pool.install(|| dispatch(args.command, &cfg, &mut out, &mut summary))?;
    out.flush()?;
    summary.flush()?;
    Ok(outcome)
}
