mod commands;
mod error;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "covlab",
    version,
    about = "Covariance operator estimation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Trace, norm, effective dimension, capacity constants and truncation pair of a kernel.
    Diagnose(DiagnoseArgs),
    /// Relative-error sweep over kernels and lengthscales.
    Sweep(SweepArgs),
    /// Membership and Assouad certificates for the lower-bound families.
    MinimaxCheck(MinimaxArgs),
    /// One estimation trial.
    Estimate(EstimateArgs),
    /// SVG figures from a summary or trial CSV.
    Plot(PlotArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelName {
    Se,
    Matern,
    Periodic,
    Permuted,
    Pwc,
}

#[derive(Args, Debug, Clone)]
pub struct KernelArgs {
    #[arg(long, value_enum)]
    pub kernel: KernelName,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long = "L")]
    pub points_per_axis: usize,
    #[arg(long = "d", default_value_t = 1)]
    pub dim: usize,
    /// Matérn smoothness.
    #[arg(long, default_value_t = 1.5)]
    pub zeta: f64,
    /// Period of the periodic kernel.
    #[arg(long, default_value_t = 0.4)]
    pub period: f64,
    /// Cells of the piecewise-constant kernel.
    #[arg(long, default_value_t = 10)]
    pub cells: usize,
    /// Tail sequence: se, exp, numeric, power:a or exp_power:rate:power.
    #[arg(long)]
    pub nu: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Sparsity exponents for Gamma1, in (0, 1].
    #[arg(long, value_delimiter = ',')]
    pub q: Vec<f64>,
    /// Monte Carlo draws for Gamma2; Gamma2 is skipped when absent.
    #[arg(long = "mc-samples")]
    pub mc_samples: Option<usize>,
    /// Sample size for the truncation pair.
    #[arg(long = "N")]
    pub n_samples: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads, or `auto`.
    #[arg(long)]
    pub threads: Option<String>,
    /// Also write one SVG per kernel.
    #[arg(long)]
    pub plot: bool,
    /// Config overrides as key=value.
    #[arg(long = "set")]
    pub set: Vec<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyClass {
    F1,
    F2,
    F3,
    Sparse,
}

#[derive(Args, Debug)]
pub struct MinimaxArgs {
    #[arg(long, value_enum)]
    pub class: FamilyClass,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long = "N")]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long = "d")]
    pub dim: Option<usize>,
    /// Scale constant of the banded families.
    #[arg(long)]
    pub w: Option<f64>,
    /// Tail sequence of the banded families.
    #[arg(long)]
    pub nu: Option<String>,
    /// Sampled family members.
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    /// Sampled Hamming-one pairs.
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    /// Monte Carlo draws for the sparse Gamma2 check.
    #[arg(long = "mc-samples")]
    pub mc_samples: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Print every check of every sampled member.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorChoice {
    Sample,
    Taper,
    Threshold,
    All,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long = "N")]
    pub n_samples: Option<usize>,
    #[arg(long, value_enum, default_value_t = EstimatorChoice::All)]
    pub estimator: EstimatorChoice,
    #[arg(long, default_value_t = 0)]
    pub trial: usize,
    #[arg(long)]
    pub c0: Option<f64>,
    /// Also write the trial as a CSV file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Directory for binary matrix dumps.
    #[arg(long = "dump-matrices")]
    pub dump_matrices: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Summary or trial CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "y-max")]
    pub y_max: Option<f64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Diagnose(a) => commands::diagnose(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::MinimaxCheck(a) => commands::minimax_check(&a),
        Command::Estimate(a) => commands::estimate(&a),
        Command::Plot(a) => commands::plot(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Partial(m) => eprint!("{m}"),
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(e.code() as u8)
        }
    }
}
