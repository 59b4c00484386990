//! `polynet`: band-power feature extraction, polynomial network induction,
//! evaluation and the experiment suites.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 growth or convergence
//! failure.

mod bench;
mod evaluate;
mod extract;
mod io;
mod synth;
mod train;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use polynet::{BenchError, FitError, GrowthError};

#[derive(Parser)]
#[command(name = "polynet", version, about = "Self-organizing polynomial networks with projection learning")]
struct Cli {
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment raw channels and compute band powers.
    Extract(extract::Args),
    /// Grow a network on a feature table.
    Train(train::Args),
    /// Score a model on a labelled feature table.
    Eval(evaluate::Args),
    /// Run an experiment suite.
    Bench(bench::Args),
    /// Generate a table from a planted network.
    Synth(synth::Args),
}

/// A flag value rejected after parsing.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn fit_code(e: &FitError) -> u8 {
    match e {
        FitError::BadParams(_) => 1,
        FitError::DegenerateDesign(_) | FitError::Diverged { .. } => 3,
        _ => 2,
    }
}

fn growth_code(e: &GrowthError) -> u8 {
    match e {
        GrowthError::BadParams(_) => 1,
        GrowthError::Fit(f) => fit_code(f),
        GrowthError::EmptyData | GrowthError::NoTarget | GrowthError::Model(_) => 2,
        GrowthError::TooSmall { .. } | GrowthError::NoNeuronAccepted { .. } => 3,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 1;
        }
        if let Some(g) = cause.downcast_ref::<GrowthError>() {
            return growth_code(g);
        }
        if let Some(f) = cause.downcast_ref::<FitError>() {
            return fit_code(f);
        }
        if let Some(b) = cause.downcast_ref::<BenchError>() {
            return match b {
                BenchError::BadOptions(_) => 1,
                BenchError::Growth(g) => growth_code(g),
                BenchError::Fit(f) => fit_code(f),
                _ => 2,
            };
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Extract(a) => extract::run(a),
        Command::Train(a) => train::run(a),
        Command::Eval(a) => evaluate::run(a),
        Command::Bench(a) => bench::run(a),
        Command::Synth(a) => synth::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
