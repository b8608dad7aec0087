//! `matlaw-id`: batch runs of the maxout identification library.
//!
//! Exit codes: 0 success, 2 configuration error, 3 infeasible program,
//! 4 solver failure (best iterate written to `<out>.partial`), 5 invariant
//! violation or failed diagnostics.

mod commands;
mod output;
mod scenario;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use matlaw_core::{Error, IdentificationResult};
use scenario::Mode;

#[derive(Parser)]
#[command(name = "matlaw-id", version, about = "Identify bar energy densities with maxout trial functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the measured energies of the boundary program as CSV.
    Simulate(RunArgs),
    /// Solve for the optimal N-piece chord density and write it as JSON.
    Identify(RunArgs),
    /// Tabulate costs and bounds over a list of piece counts.
    Convergence(RunArgs),
    /// Run the structural diagnostics and write a JSON report.
    Diagnose(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Number of pieces N.
    #[arg(long, conflicts_with = "neurons_list")]
    neurons: Option<usize>,
    /// Comma-separated piece counts, e.g. 2,4,8.
    #[arg(long, value_delimiter = ',')]
    neurons_list: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Infeasible(String),
    Solver {
        message: String,
        partial: Option<Box<IdentificationResult>>,
    },
    Invariant(String),
    Failed(String),
}

impl CliError {
    pub fn config(e: Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn from_core(e: Error) -> Self {
        match e {
            Error::InfeasibleProgram { .. } => CliError::Infeasible(e.to_string()),
            Error::NumericalFailure { message, best } => CliError::Solver { message, partial: best },
            Error::InvariantViolation(_) => CliError::Invariant(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Solver { .. } => 4,
            CliError::Invariant(_) | CliError::Failed(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
            CliError::Solver { message, .. } => write!(f, "solver failure: {message}"),
            CliError::Invariant(m) => write!(f, "invariant violation: {m}"),
            CliError::Failed(m) => write!(f, "diagnostics failed: {m}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::Identify(a) => ("identify", a),
        Command::Convergence(a) => ("convergence", a),
        Command::Diagnose(a) => ("diagnose", a),
    };
    let result = scenario::Scenario::load(&args.scenario).and_then(|scenario| {
        let run = commands::Run {
            scenario,
            neurons: args.neurons,
            neurons_list: args.neurons_list,
            mode: args.mode,
            out: args.out,
        };
        match name {
            "simulate" => commands::simulate(&run),
            "identify" => commands::identify(&run),
            "convergence" => commands::convergence(&run),
            _ => commands::diagnose(&run),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("matlaw-id {name}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
