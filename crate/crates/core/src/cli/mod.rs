//! The `rtstat` command line: configuration ingestion, command dispatch and report
//! emission.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 domain error, 4 numeric failure,
//! 5 validation failure.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{Outcome, RunOptions};
pub use config::AnalysisConfig;
pub use report::Report;

use crate::checks::CheckKind;

#[derive(Debug, Parser)]
#[command(name = "rtstat", version, about = "Return-time statistics for subshifts of finite type")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scalars, the scaled CGF and the rate function.
    Analyze(CommonArgs),
    /// Scaled CGF and its first two derivatives on the alpha grid.
    Scgf(CommonArgs),
    /// Rate function on the u grid.
    Rate(CommonArgs),
    /// Simulated CLT check against the predicted variance.
    Clt(CommonArgs),
    /// Simulated return times, tail rates and their exact counterparts.
    Simulate(CommonArgs),
    /// All cross-checks; exit code 5 if a deterministic one fails.
    Validate(CommonArgs),
}

impl Command {
    fn parts(&self) -> (&'static str, &CommonArgs) {
        match self {
            Command::Analyze(a) => ("analyze", a),
            Command::Scgf(a) => ("scgf", a),
            Command::Rate(a) => ("rate", a),
            Command::Clt(a) => ("clt", a),
            Command::Simulate(a) => ("simulate", a),
            Command::Validate(a) => ("validate", a),
        }
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory (default: output.dir from the config, else ./out).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Random seed; overrides simulation.seed.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Drop grid points outside the certified domain instead of failing.
    #[arg(long)]
    pub clip_grid: bool,
    /// Sample count; overrides simulation.samples.
    #[arg(long, value_name = "N")]
    pub samples: Option<usize>,
    /// Worker threads for simulation; never changes results.
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
}

impl CommonArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            out: self.out.clone(),
            seed: self.seed,
            clip_grid: self.clip_grid,
            samples: self.samples,
            workers: self.workers,
        }
    }
}

/// Runs a parsed command line, printing a summary to stdout and errors to stderr.
/// Returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let (name, args) = cli.command.parts();
    match commands::run_named(name, &args.config, args.options()) {
        Ok(outcome) => {
            print_summary(&outcome);
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("rtstat {name}: {e}");
            e.exit_code()
        }
    }
}

fn print_summary(o: &Outcome) {
    let r = &o.report;
    let s = &r.scalars;
    println!(
        "P = {:.10}  P' = {:.10}  alpha0 = {:.10}  mu(A) = {:.10}  tau = {}  sigma2 = {:.10}",
        s.pressure.value, s.restricted_pressure.value, s.alpha0.value, s.mu_a.value, s.tau.value, s.sigma2.value
    );
    for c in &r.checks {
        let kind = match c.kind {
            CheckKind::Deterministic => "det",
            CheckKind::Stochastic => "sto",
        };
        let z = c.z_score.map(|z| format!("  z = {z:+.2}")).unwrap_or_default();
        println!(
            "{} [{kind}] {:<28} {:.3e} (gate {:.3e}){z}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.tolerance
        );
    }
    for n in &r.notices {
        println!("note: {n}");
    }
    println!("wrote {} file(s) to {}", r.files.len(), o.out_dir.display());
}
