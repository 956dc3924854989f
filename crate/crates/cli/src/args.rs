use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sps::TruncationSpec;

#[derive(Debug, Parser)]
#[command(name = "sps", version, about = "Spectral power series solutions of ẋ = diag(x)(b + Ax)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Series trajectory from the initial condition in the input file.
    Solve(RunArgs),
    /// Unit-parameter coefficient table.
    Coeffs(CoeffArgs),
    /// Convergence certificate (N0, N1, N2, K, t0).
    Bounds(CoeffArgs),
    /// Corrected reduced model over the first L variables.
    Reduce(ReduceArgs),
    /// Series and numerical trajectories side by side with their error.
    Compare(RunArgs),
    /// Closed-form logistic solution against its series.
    Logistic(LogisticArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitChoice {
    Sum,
    Tail,
}

#[derive(Debug, Args)]
pub struct Output {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Truncation {
    /// Per-index cap: every nᵢ ≤ this value.
    #[arg(long, conflicts_with = "total_degree")]
    pub truncation: Option<u32>,
    /// Total-degree cap: Σnᵢ ≤ this value.
    #[arg(long)]
    pub total_degree: Option<u32>,
}

impl Truncation {
    pub fn spec(&self) -> Option<TruncationSpec> {
        match (self.truncation, self.total_degree) {
            (Some(d), _) => Some(TruncationSpec::PerIndex(d)),
            (None, Some(n)) => Some(TruncationSpec::TotalDegree(n)),
            (None, None) => None,
        }
    }
}

#[derive(Debug, Args)]
pub struct Grid {
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    /// Output spacing.
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub grid: Grid,
    #[command(flatten)]
    pub truncation: Truncation,
    #[arg(long, value_enum, default_value = "sum")]
    pub fit: FitChoice,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct CoeffArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub truncation: Truncation,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    pub input: PathBuf,
    /// Number of leading variables kept.
    #[arg(long)]
    pub keep: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct LogisticArgs {
    #[arg(long)]
    pub r: f64,
    #[arg(long)]
    pub k: f64,
    #[arg(long)]
    pub x0: f64,
    #[command(flatten)]
    pub grid: Grid,
    /// Series order N (either flag; the logistic has one index).
    #[command(flatten)]
    pub truncation: Truncation,
    #[command(flatten)]
    pub output: Output,
}
