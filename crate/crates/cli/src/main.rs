use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use liebrob_cli::config::{ExperimentConfig, ExperimentKind};
use liebrob_cli::experiments::Report;
use liebrob_cli::{run, HarnessError, RunOptions};

#[derive(Parser, Debug)]
#[command(
    name = "liebrob",
    version,
    about = "Random-circuit operator growth experiments and tail-bound checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo commutator statistics.
    Simulate(Common),
    /// Tail-bound tables.
    Bound(Common),
    /// Self-avoiding path enumeration.
    Paths(Common),
    /// Empirical exceedances against the tail bounds.
    Verify(Common),
    /// Matrix martingale checks.
    Martingale(Common),
}

impl Command {
    fn split(&self) -> (ExperimentKind, &Common) {
        match self {
            Command::Simulate(c) => (ExperimentKind::Simulate, c),
            Command::Bound(c) => (ExperimentKind::Bound, c),
            Command::Paths(c) => (ExperimentKind::Paths, c),
            Command::Verify(c) => (ExperimentKind::Verify, c),
            Command::Martingale(c) => (ExperimentKind::Martingale, c),
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<bool> {
    let (kind, common) = cli.command.split();
    let config = ExperimentConfig::load(&common.config)?;
    if config.kind != kind {
        return Err(HarnessError::Mismatch(format!(
            "subcommand `{}` was given a `{}` config",
            kind.name(),
            config.kind.name()
        ))
        .into());
    }
    let opts = RunOptions {
        seed: common.seed,
        output_dir: common.out.clone(),
    };
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = common.workers {
            anyhow::ensure!(n > 0, "--workers must be >= 1");
            b = b.num_threads(n);
        }
        b.build().context("building worker pool")?
    };
    let outcome = pool.install(|| run(&config, &opts))?;
    if let Report::Verify(r) = &outcome.report {
        for row in &r.rows {
            println!(
                "point {} r={} delta={} epsilon={:.6e} exceed={}/{} upper={:.4} vacuous={} {}",
                row.point,
                row.r,
                row.delta,
                row.epsilon,
                row.exceedances,
                row.samples,
                row.upper_confidence,
                row.vacuous,
                if row.pass { "PASS" } else { "FAIL" }
            );
        }
    }
    println!(
        "wrote {} files to {}",
        outcome.files.len(),
        outcome.output_dir.display()
    );
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
