use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use deepwell::limit::NodalSignature;
use deepwell::pipeline::{exit_code, run_command, Command, RunOptions, RunSummary};
use deepwell::Error;

/// Deep-well continuation of nonlinear Schrödinger standing waves.
#[derive(Parser, Debug)]
#[command(name = "deepwell", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Solve the limit problem for every configured signature.
    SolveLimit(Common),
    /// Hessian spectra of the limit solutions.
    Spectrum(Common),
    /// Continue limit solutions along the λ ladder.
    Continue {
        #[command(flatten)]
        common: Common,
        /// Signature to continue, e.g. `0,0` or `1,0;+,-`. Repeatable.
        #[arg(long = "signature")]
        signatures: Vec<String>,
    },
    /// Run the check suite.
    Verify(Common),
    /// Everything above.
    All(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "deepwell-out")]
    out: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    plots: bool,
    /// Worker threads across signatures.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl From<Common> for RunOptions {
    fn from(c: Common) -> Self {
        RunOptions { config: c.config, out: c.out, plots: c.plots, threads: c.threads, seed: c.seed }
    }
}

fn report(summary: &RunSummary) {
    println!("config {}  seed {}", &summary.config_hash[..12], summary.seed);
    for s in &summary.limit_solutions {
        println!("limit {s}: ok");
    }
    for f in &summary.limit_failures {
        println!("limit {f}");
    }
    for b in &summary.branches {
        let status = if b.converged { "converged" } else { "FAILED" };
        let lam = b.empirical_lambda.map_or("-".to_string(), |l| format!("{l:.3e}"));
        println!("branch {}: {status}, {} rungs, chord from {lam}", b.signature, b.rungs);
        if let Some(f) = &b.failure {
            println!("  {f}");
        }
    }
    for (name, pass) in &summary.checks {
        println!("check {name}: {}", if *pass { "pass" } else { "FAIL" });
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Sub::SolveLimit(c) => (Ok(Command::SolveLimit), c),
        Sub::Spectrum(c) => (Ok(Command::Spectrum), c),
        Sub::Verify(c) => (Ok(Command::Verify), c),
        Sub::All(c) => (Ok(Command::All), c),
        Sub::Continue { common, signatures } => {
            let parsed: Result<Vec<_>, _> = signatures.iter().map(|s| NodalSignature::parse(s)).collect();
            (parsed.map(Command::Continue).map_err(|e| Error::Config(vec![format!("--signature: {e}")])), common)
        }
    };
    let result = cmd.and_then(|cmd| run_command(cmd, &common.into()));
    match &result {
        Ok(summary) => report(summary),
        Err(Error::Config(errors)) => {
            eprintln!("invalid configuration:");
            for e in errors {
                eprintln!("  {e}");
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
