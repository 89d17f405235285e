mod args;
mod config_file;
mod estimate;
mod power;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::args::{EstimateArgs, PowerArgs, SimulateArgs};

#[derive(Parser, Debug)]
#[command(name = "wte", version, about = "Worst-case subpopulation treatment effect estimation")]
struct Cli {
    /// Worker threads (default: all cores). WTE_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Flags file, `key = value` lines or a JSON object. Command-line flags win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<std::path::PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the worst-case effect over a grid of tail masses from a CSV file.
    Estimate(EstimateArgs),
    /// Sample size for detecting a shift in the worst-case effect.
    Power(PowerArgs),
    /// Monte Carlo experiments on a Gaussian design with known truth.
    Simulate(SimulateArgs),
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Estimation(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Estimation(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Estimation(m) => m,
        }
    }
}

impl From<wte_core::Error> for CliError {
    fn from(e: wte_core::Error) -> Self {
        use wte_core::Error as E;
        match e {
            E::Data(_) => CliError::Data(e.to_string()),
            E::AlphaOutOfRange(_) | E::LevelOutOfRange(_) | E::KOutOfRange { .. } | E::InvalidConfig(_) | E::InvalidSpec(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Estimation(e.to_string()),
        }
    }
}

impl From<wte_core::DataError> for CliError {
    fn from(e: wte_core::DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize, CliError> {
    let n = match std::env::var("WTE_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| CliError::Config(format!("WTE_THREADS must be a non-negative integer (0 for all cores), got `{v}`")))?,
        Err(_) => flag.unwrap_or(0),
    };
    Ok(n)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = thread_count(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Estimate(a) => estimate::run(a),
        Command::Power(a) => power::run(a),
        Command::Simulate(a) => simulate::run(a),
    })
}

fn main() -> ExitCode {
    let argv = match config_file::expand(std::env::args().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return ExitCode::from(e.code());
        }
    };
    let cli = Cli::try_parse_from(argv).unwrap_or_else(|e| e.exit());
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
