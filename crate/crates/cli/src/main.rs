//! Command-line runner: traces, zipping, SLE samples and experiments.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Exit code for malformed input, bad flags and unreadable files.
pub const EXIT_INPUT: u8 = 2;
/// Exit code for self-intersecting curves and refused checks.
pub const EXIT_DOMAIN: u8 = 3;
/// Exit code when a result misses its tolerance.
pub const EXIT_TOLERANCE: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "loewner-lab", version, about = "Loewner chains: traces, zipper, SLE and closeness experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct Common {
    /// SLE parameter.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cells, levels or sample count, depending on the command.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    /// Tolerance of the command's consistency check.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    WongZakai,
    SupportProbe,
    ChristmasTree,
    Certify,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trace of a driver file; `--n` resamples the output times uniformly.
    Trace {
        #[arg(long)]
        driver: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Driver of a polyline by the vertical-slit zipper.
    Zip {
        #[arg(long)]
        curve: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Brownian driver with `n` cells on [0, 1] and its trace.
    Sample {
        #[command(flatten)]
        common: Common,
    },
    /// Runs one of the experiments; flags override the JSON config.
    Experiment {
        #[arg(value_enum)]
        name: Experiment,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Reference driver file (support-probe, certify); zero driver otherwise.
        #[arg(long)]
        lam: Option<PathBuf>,
        /// Compared driver file (certify); the reference otherwise.
        #[arg(long)]
        xi: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

/// A failed run: exit code and message.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<loewner_lab::Error> for Failure {
    fn from(e: loewner_lab::Error) -> Self {
        use loewner_lab::Error as E;
        let code = match &e {
            E::InvalidInput(_) | E::OutOfRange(_) | E::Format { .. } => EXIT_INPUT,
            E::SelfIntersection { .. } | E::PrematureTip { .. } | E::Domain(_) | E::Refused { .. } => EXIT_DOMAIN,
            E::Numerical(_) => EXIT_TOLERANCE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn threads_from_env() -> Result<Option<usize>, Failure> {
    match std::env::var("LOEWNER_LAB_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| Failure::input(format!("thread pool: {e}")))?;
                Ok(Some(n))
            }
            _ => Err(Failure::input(format!("LOEWNER_LAB_THREADS must be a positive integer, got {s:?}"))),
        },
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let threads = threads_from_env()?;
    match cli.command {
        Command::Trace { driver, common } => commands::trace(&driver, &common, threads),
        Command::Zip { curve, common } => commands::zip(&curve, &common, threads),
        Command::Sample { common } => commands::sample(&common, threads),
        Command::Experiment {
            name,
            config,
            lam,
            xi,
            common,
        } => commands::experiment(
            name,
            &commands::Inputs {
                config,
                lam,
                xi,
            },
            &common,
            threads,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
