//! Command-line definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::SimulateSettings;

#[derive(Debug, Parser)]
#[command(
    name = "gdyn",
    version,
    about = "Simulations, exact correlators and checks for diffusing non-Hermitian matrices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run stochastic trajectories and write eigenvalue snapshots.
    Simulate(SimulateArgs),
    /// Evaluate the exact finite-N density or eigenvector correlator on a grid.
    Exact(ExactArgs),
    /// Evaluate large-N limit laws.
    Asymptotic(AsymptoticArgs),
    /// Run a verification suite; exits with status 3 when a check fails.
    Verify(VerifyArgs),
    /// Coulomb gas versus matrix Ornstein–Uhlenbeck: trajectories and real-part histograms.
    CompareFig1(Fig1Args),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output directory (created if missing).
    #[arg(long, default_value = "gdyn-out")]
    pub out: PathBuf,
    /// Also write gnuplot scripts next to the CSV files.
    #[arg(long)]
    pub gnuplot: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML file with simulation settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: SimulateSettings,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// `null`, `spiric:re,im` or `re,im;re,im;…`.
    #[arg(long, allow_hyphen_values = true)]
    pub source: Option<String>,
    /// File with one complex value per line.
    #[arg(long, conflicts_with = "source")]
    pub source_file: Option<PathBuf>,
    /// Matrix size (required for `null` and `spiric`).
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Half width of a square window centred at the origin.
    #[arg(long, default_value_t = 1.5)]
    pub half_width: f64,
    /// Explicit window `re_min,re_max,im_min,im_max`.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    /// Cells along the real axis.
    #[arg(long, default_value_t = 41)]
    pub nx: usize,
    /// Cells along the imaginary axis (defaults to nx).
    #[arg(long)]
    pub ny: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    Density,
    Correlator,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[arg(value_enum)]
    pub quantity: Quantity,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Rescaled time τ = N t.
    #[arg(long)]
    pub tau: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Also evaluate the correlator by the double-contour representation and report the discrepancy.
    #[arg(long)]
    pub cross_check: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Law {
    /// Macroscopic correlator from the saddle point of a general source.
    Macro,
    /// Closed form for the two-point source ±a.
    Spiric,
    /// Edge profile in the scaled distance δ.
    Edge,
    /// Collision profile in the scaled time T.
    Collision,
}

#[derive(Debug, Args)]
pub struct AsymptoticArgs {
    #[arg(value_enum)]
    pub law: Law,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Location a of the two-point source.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Range start for one-dimensional laws.
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    pub from: f64,
    /// Range end for one-dimensional laws.
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    pub to: f64,
    /// Samples for one-dimensional laws.
    #[arg(long, default_value_t = 121)]
    pub samples: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Identities,
    Covariances,
    Ecp,
    Hierarchy,
    Integrators,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Random points, states or cases.
    #[arg(long)]
    pub points: Option<usize>,
    /// Matrix size where the suite has one.
    #[arg(long)]
    pub n: Option<usize>,
    /// Monte Carlo draws per point.
    #[arg(long)]
    pub draws: Option<usize>,
    /// Monte Carlo trajectories.
    #[arg(long)]
    pub trajectories: Option<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct Fig1Args {
    /// Matrix size (even).
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Consecutive steps written for trajectory plots.
    #[arg(long, default_value_t = 30)]
    pub steps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Histogram bins on [−1, 1].
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    #[command(flatten)]
    pub output: Output,
}
