use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use discgof::harness::config::RunConfig;
use discgof::harness::run::{run_fit, run_mc, run_simulate, run_test, Report};
use discgof::Error;

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Goodness-of-fit diagnostics for ordered-choice and count time-series models.
#[derive(Debug, Parser)]
#[command(name = "discgof", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Fit every configured model by maximum likelihood.
    Fit(Common),
    /// Bootstrap goodness-of-fit tests for every configured model.
    Test(Common),
    /// Simulate a series from a configured model.
    Simulate(Common),
    /// Monte Carlo size and power study over built-in scenarios.
    Mc(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Validation(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.into())
        } else {
            Failure::Numerical(e.into())
        }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let (common, run): (&Common, fn(&RunConfig) -> discgof::Result<Report>) = match &cli.verb {
        Verb::Fit(c) => (c, run_fit),
        Verb::Test(c) => (c, run_test),
        Verb::Simulate(c) => (c, run_simulate),
        Verb::Mc(c) => (c, run_mc),
    };
    let mut cfg = RunConfig::load(&common.config)?;
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    let out_dir = match &common.out {
        Some(dir) => dir.clone(),
        None => cfg.resolve(&cfg.output.dir),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Failure::Validation(anyhow::anyhow!("--threads must be positive")));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("cannot start worker pool").map_err(Failure::Numerical)?;
    let report = pool.install(|| run(&cfg))?;
    let written = report
        .write_to(&out_dir)
        .with_context(|| format!("cannot write to {}", out_dir.display()))
        .map_err(Failure::Validation)?;
    print!("{}", report.summary);
    for path in written {
        log::info!("wrote {}", path.display());
    }
    match report.failure {
        Some(msg) => Err(Failure::Numerical(anyhow::anyhow!(msg))),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
