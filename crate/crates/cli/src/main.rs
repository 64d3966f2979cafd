mod commands;
mod manifest;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lob_tactics::dp::{Regime, StepKernel};
use lob_tactics::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lob-tactics", version, about = "Optimal execution tactics on a queue-reactive order book")]
struct Cli {
    /// Worker threads; LOB_TACTICS_THREADS is used when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file and print its normalized form.
    ValidateConfig { config: PathBuf },
    /// Estimate intensities and regeneration laws from an event CSV.
    Calibrate(commands::CalibrateArgs),
    /// Generate a synthetic event stream from a model file.
    GenSynthetic(commands::GenSyntheticArgs),
    /// Long-run price impact of the book state.
    Impact(commands::ImpactArgs),
    /// Solve the execution problem by backward recursion.
    Solve(commands::SolveArgs),
    /// Monte Carlo evaluation of a policy table or a baseline.
    Simulate(commands::SimulateArgs),
    /// Drift assumptions, Lyapunov margins and convergence curves.
    CheckErgodicity(commands::ErgodicityArgs),
    /// Recompute the data behind a named figure.
    ReproduceFigure(commands::FigureArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Fixed,
    Anytime,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Transition {
    Exp,
    Fd,
}

/// Decision regime flags shared by `solve` and `simulate`.
#[derive(Args, Debug, Clone)]
pub struct RegimeArgs {
    #[arg(long, value_enum, default_value = "anytime")]
    mode: Mode,
    /// Step kernel of the any-time regime.
    #[arg(long, value_enum, default_value = "exp")]
    transition: Transition,
    /// Overrides the decision interval of the model file.
    #[arg(long)]
    dt: Option<f64>,
    /// Overrides the horizon of the model file.
    #[arg(long)]
    horizon: Option<f64>,
}

impl RegimeArgs {
    pub fn regime(&self) -> Regime {
        match (self.mode, self.transition) {
            (Mode::Fixed, _) => Regime::FixedFrequency,
            (Mode::Anytime, Transition::Exp) => Regime::AnyTime(StepKernel::Exponential),
            (Mode::Anytime, Transition::Fd) => Regime::AnyTime(StepKernel::FiniteDifference),
        }
    }
}

/// Error with the exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_DATA: u8 = 4;

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::Model(_) | Error::IllegalControl { .. } => EXIT_CONFIG,
            Error::Numeric(_) | Error::StateSpaceOverflow { .. } => EXIT_NUMERIC,
            Error::Data(_) | Error::Csv(_) | Error::Json(_) | Error::Io(_) => EXIT_DATA,
        };
        Failure { code, error: e.into() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_DATA, error: e.into() }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure { code: EXIT_DATA, error: e.into() }
    }
}

pub type CmdResult<T = ()> = std::result::Result<T, Failure>;

pub fn config_failure(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_CONFIG, error: anyhow::anyhow!(msg.into()) }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("LOB_TACTICS_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| config_failure(format!("LOB_TACTICS_THREADS must be a thread count, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> CmdResult {
    if let Some(n) = thread_count(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config_failure(format!("cannot start {n} threads: {e}")))?;
    }
    match cli.command {
        Command::ValidateConfig { config } => commands::validate_config(&config),
        Command::Calibrate(a) => commands::calibrate(&a),
        Command::GenSynthetic(a) => commands::gen_synthetic(&a),
        Command::Impact(a) => commands::impact(&a),
        Command::Solve(a) => commands::solve(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::CheckErgodicity(a) => commands::check_ergodicity(&a),
        Command::ReproduceFigure(a) => commands::reproduce_figure(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
