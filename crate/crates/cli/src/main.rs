//! `hklab`: distances, divergences, constant estimates, verification
//! harnesses and Langevin experiments from the command line.
//!
//! Exit codes: 0 success, 1 a harness or experiment check failed, 2 invalid
//! input or configuration, 3 a solver did not converge.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] hklab::Error),

    #[error("{0}")]
    Input(String),

    /// Checks ran to completion and at least one failed.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Core(hklab::Error::NotConverged { .. }) => 3,
            CliError::Core(_) | CliError::Input(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hklab", version, about = "Hellinger-Kantorovich transport and functional-inequality laboratory")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "HKLAB_THREADS")]
    threads: Option<usize>,

    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    report: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Distance or divergence between two measure files.
    Dist(DistArgs),
    /// Estimate a reverse functional-inequality constant of a kernel.
    Constants(ConstantsArgs),
    /// Run verification harnesses on a kernel.
    Verify(VerifyArgs),
    /// Run a Langevin or Gaussian experiment from a JSON config.
    Simulate(SimulateArgs),
    /// Emit a built-in space or kernel.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    W2,
    He2,
    Wab,
    Hk,
    T0b,
    Tab,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub mu0: PathBuf,
    #[arg(long)]
    pub mu1: PathBuf,
    #[arg(long, value_enum)]
    pub metric: Metric,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    /// Metric rescaling `d ↦ scale·d` for `hk`.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Dictionary config (JSON) for the `tab` lower bound.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    /// LET solver config (JSON, partial allowed) for `wab` and `hk`.
    #[arg(long)]
    pub let_config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Rpi,
    Rlsi,
    Grad,
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub kernel: PathBuf,
    #[arg(long, value_enum)]
    pub which: Which,
    /// Dictionary config (JSON, partial allowed).
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    /// Write the witness function as a one-value-per-line CSV.
    #[arg(long)]
    pub witness_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Hkc,
    Eti,
    Whi,
    Hpi,
    Ihi,
    Kuwada,
    Increment,
    All,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").args(["constant", "estimate"]))]
pub struct VerifyArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub kernel: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    /// Use this constant for every selected suite.
    #[arg(long)]
    pub constant: Option<f64>,
    /// Estimate the constant each suite needs (RPI for hkc/hpi, rLSI for
    /// whi/ihi/eti, gradient bound for kuwada).
    #[arg(long)]
    pub estimate: bool,
    /// Multiply the constants by this factor (e.g. 0.25 to falsify).
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Sampled (f, x, y, p) tuples for whi, hpi and increment.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Dirac pairs for hkc, eti, kuwada and ihi.
    #[arg(long, default_value_t = 50)]
    pub dirac_pairs: usize,
    /// Pairs of random finitely supported measures for hkc, eti, kuwada.
    #[arg(long, default_value_t = 50)]
    pub random_pairs: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1.5, 2.0, 4.0])]
    pub p_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub kappas: Option<Vec<f64>>,
    /// Absolute tolerance of the sampled suites.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    W2decay,
    Hedecay,
    Quasi,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON config; unknown fields are rejected.
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    /// Where to write the decay series CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(subcommand)]
    pub what: GenWhat,
    /// Output file (stdout if absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum GenWhat {
    /// Symmetric 1-D lattice on [−radius, radius].
    Grid {
        #[arg(long, default_value_t = 6.0)]
        radius: f64,
        #[arg(long, default_value_t = 0.05)]
        spacing: f64,
    },
    /// Cycle graph with unit edges.
    Cycle {
        #[arg(long)]
        n: usize,
    },
    /// Two points at the given distance.
    TwoPoint {
        #[arg(long, default_value_t = 1.0)]
        distance: f64,
    },
    /// Flat heat kernel (variance 2t) on a symmetric lattice.
    Heat {
        #[arg(long, default_value_t = 6.0)]
        radius: f64,
        #[arg(long, default_value_t = 0.05)]
        spacing: f64,
        #[arg(long)]
        t: f64,
        /// Also write the lattice as a space file.
        #[arg(long)]
        space_out: Option<PathBuf>,
    },
    /// Ornstein–Uhlenbeck kernel for U = a x²/2.
    Ou {
        #[arg(long, default_value_t = 6.0)]
        radius: f64,
        #[arg(long, default_value_t = 0.05)]
        spacing: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long)]
        space_out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Input("threads: must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("threads: {e}")))?;
    }
    let report = cli.report.as_deref();
    match cli.command {
        Command::Dist(args) => commands::dist(&args, cli.seed, report),
        Command::Constants(args) => commands::constants(&args, cli.seed, report),
        Command::Verify(args) => commands::verify(&args, cli.seed, report),
        Command::Simulate(args) => commands::simulate(&args, cli.seed, report),
        Command::Gen(args) => commands::gen(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hklab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
