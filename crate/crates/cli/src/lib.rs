//! Command-line experiment runner: resolves a configuration, runs one
//! pipeline stage and writes plot-ready CSV files with a run manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::commands::{dispatch, Run};
use crate::config::{resolve, Command, Overrides};
use crate::error::{CliError, CliResult};
use crate::output::{commit, previous_outputs, RunManifest};

/// Environment variable overriding the configured worker count.
pub const WORKERS_ENV: &str = "LCUPREP_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "lcuprep", version, about = "Truncated fermionic state preparation and observables")]
pub struct Cli {
    /// TOML config file, or a manifest.json to replay its resolved config
    #[arg(long, short = 'c', global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Truncate a ground state and synthesize its loading circuits
    Prepare(Overrides),
    /// Loschmidt echo, spectrum and error per M for the ground state
    Echo(Overrides),
    /// Minimal M over a (g, m0) grid
    Sweep(Overrides),
    /// Echo outputs for the first excited state, plus the M comparison
    Excited(Overrides),
    /// Current-current correlator per M
    Correlator(Overrides),
    /// Run the invariant suite
    Verify(Overrides),
}

impl Sub {
    pub fn parts(&self) -> (Command, &Overrides) {
        match self {
            Self::Prepare(o) => (Command::Prepare, o),
            Self::Echo(o) => (Command::Echo, o),
            Self::Sweep(o) => (Command::Sweep, o),
            Self::Excited(o) => (Command::Excited, o),
            Self::Correlator(o) => (Command::Correlator, o),
            Self::Verify(o) => (Command::Verify, o),
        }
    }
}

fn workers(configured: usize) -> CliResult<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("{WORKERS_ENV} = {v:?} is not a worker count"))),
        Err(_) => Ok(configured),
    }
}

/// Run one command and return the process exit code.
pub fn execute(cli: &Cli) -> CliResult<i32> {
    let (cmd, overrides) = cli.command.parts();
    let cfg = resolve(cmd, cli.config.as_deref(), overrides)?;
    previous_outputs(&cfg.output)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers(cfg.workers)?)
        .build()
        .map_err(|e| CliError::Resource(format!("cannot start worker pool: {e}")))?;

    let start = Instant::now();
    let mut run = Run::new(&cfg);
    pool.install(|| dispatch(cmd, &mut run))?;
    let failed = !run.failures.is_empty();
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.name().into(),
        config: cfg.clone(),
        seed: cfg.seed,
        workers: pool.current_num_threads(),
        duration_seconds: start.elapsed().as_secs_f64(),
        long_running: run.long_running,
        status: if failed { "invariant-failure" } else { "ok" }.into(),
        warnings: run.warnings.clone(),
        files: Vec::new(),
    };
    commit(&cfg.output, &run.outputs, manifest)?;
    for line in &run.report {
        println!("{line}");
    }
    println!("wrote {} files to {}", run.outputs.names().count() + 1, cfg.output.display());
    if failed {
        for f in &run.failures {
            eprintln!("invariant violated: {f}");
        }
        return Ok(2);
    }
    Ok(0)
}

/// Parse arguments and run; usage errors exit with the validation code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
