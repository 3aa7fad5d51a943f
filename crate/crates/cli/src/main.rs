//! `stable-op-lab`: runs one experiment per invocation and leaves CSV/JSON
//! artifacts plus `manifest.json` in the output directory.
//!
//! Exit codes: 0 when every check passed, 2 when a check failed, 1 on errors.

mod apply;
mod artifacts;
mod error;
mod heat;
mod inputs;
mod measure;
mod solve;
mod symbol;
mod verify;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use artifacts::Artifacts;
use error::{CliError, CliResult};

pub const THREADS_ENV: &str = "STABLE_OP_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "stable-op-lab", version, about = "Symmetric stable operators: symbols, heat kernels, Dirichlet solves and verification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the symbol and check the ellipticity bounds.
    Symbol(symbol::SymbolArgs),
    /// Heat kernel p(t, .) on a periodic grid with its diagnostics.
    HeatKernel(heat::HeatKernelArgs),
    /// Mass, ringing, self-similarity and semigroup checks of the heat kernel.
    HeatChecks(heat::HeatChecksArgs),
    /// Lu at given points by pointwise quadrature.
    Apply(apply::ApplyArgs),
    /// Dirichlet problem on a grid.
    Solve(solve::SolveArgs),
    /// Regularity measurements of a grid field.
    Measure(measure::MeasureArgs),
    /// Barrier, Liouville, half-space and counterexample experiments.
    Verify(verify::VerifyArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Symbol(_) => "symbol",
            Command::HeatKernel(_) => "heat-kernel",
            Command::HeatChecks(_) => "heat-checks",
            Command::Apply(_) => "apply",
            Command::Solve(_) => "solve",
            Command::Measure(_) => "measure",
            Command::Verify(_) => "verify",
        }
    }

    fn out(&self) -> &Path {
        match self {
            Command::Symbol(a) => &a.out,
            Command::HeatKernel(a) => &a.out,
            Command::HeatChecks(a) => &a.out,
            Command::Apply(a) => &a.out,
            Command::Solve(a) => &a.out,
            Command::Measure(a) => &a.out,
            Command::Verify(a) => &a.out,
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::config(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config(format!("cannot configure {n} worker threads: {e}")))
}

fn run(cli: &Cli) -> CliResult<bool> {
    configure_threads()?;
    let start = Instant::now();
    let mut out = Artifacts::create(cli.command.out())?;
    let config = match &cli.command {
        Command::Symbol(a) => symbol::run(a, &mut out),
        Command::HeatKernel(a) => heat::run_kernel(a, &mut out),
        Command::HeatChecks(a) => heat::run_checks(a, &mut out),
        Command::Apply(a) => apply::run(a, &mut out),
        Command::Solve(a) => solve::run(a, &mut out),
        Command::Measure(a) => measure::run(a, &mut out),
        Command::Verify(a) => verify::run(a, &mut out),
    }?;
    for v in &out.verdicts {
        println!("{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    out.finish(cli.command.name(), &config, start.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
