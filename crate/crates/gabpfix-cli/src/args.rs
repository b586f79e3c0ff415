//! Command-line interface definition.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cdma::Spreading;

#[derive(Parser)]
#[command(
    name = "gabpfix",
    version,
    about = "Gaussian belief propagation solvers with diagonal-loading convergence fixes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Solve a symmetric system J x = h from Matrix Market files
    Solve(SolveArgs),
    /// Least-squares solve of a rectangular system, optionally ridge-regularized
    Lsq(LsqArgs),
    /// Random-spreading CDMA detection experiments
    #[command(subcommand)]
    Cdma(CdmaCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Plain message passing, no loading
    Gabp,
    /// Double loop: inner GaBP solves of the loaded model
    Double,
    /// Single loop: one sweep per outer step with damped updates
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GammaMode {
    /// Gamma_ii = gamma * J_ii with --gamma
    Uniform,
    /// Load each row up to diagonal dominance plus a margin
    Dd,
    /// Per-node loading values from --gamma-file
    Custom,
}

#[derive(Args)]
pub struct SolveArgs {
    /// System matrix (Matrix Market coordinate real symmetric)
    #[arg(long)]
    pub matrix: PathBuf,
    /// Right-hand side vector, one real per line
    #[arg(long)]
    pub rhs: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Double)]
    pub mode: Mode,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Args)]
pub struct LsqArgs {
    /// Rectangular matrix (Matrix Market coordinate real general, rows >= cols)
    #[arg(long)]
    pub matrix: PathBuf,
    /// Observation vector, one real per line
    #[arg(long)]
    pub rhs: PathBuf,
    /// Ridge regularization added to the normal equations
    #[arg(long, default_value_t = 0.0)]
    pub gamma_reg: f64,
    #[command(flatten)]
    pub solver: SolverFlags,
}

/// Flags shared by every mode that runs a loaded solver.
#[derive(Args)]
pub struct SolverFlags {
    #[arg(long, value_enum, default_value_t = GammaMode::Dd)]
    pub gamma_mode: GammaMode,
    /// Uniform loading level (required with --gamma-mode uniform)
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Per-node loading values, one real per line (required with --gamma-mode custom)
    #[arg(long)]
    pub gamma_file: Option<PathBuf>,
    /// Margin for the diagonally-dominant loading construction
    #[arg(long)]
    pub margin: Option<f64>,
    /// Damping step s in (0, 1) for the single-loop solver
    #[arg(long, default_value_t = 0.5)]
    pub step_size: f64,
    /// Inner message tolerance (default: min(outer-tol / 10, 1e-6))
    #[arg(long)]
    pub inner_tol: Option<f64>,
    /// Outer residual tolerance on ||J x - h||_inf
    #[arg(long, default_value_t = 1e-6)]
    pub outer_tol: f64,
    /// Sweep budget per inner solve (or for the whole run in gabp mode)
    #[arg(long, default_value_t = 10_000)]
    pub max_inner: usize,
    /// Outer step budget
    #[arg(long, default_value_t = 2_000)]
    pub max_outer: usize,
    /// Write the JSON run report here (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the CSV trace here
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum CdmaCommand {
    /// Plain GaBP on a random instance, tracing per-iteration estimates
    Diverge(CdmaDivergeArgs),
    /// Loaded solver on a random instance, cross-checked against a dense solve
    Fixed(CdmaFixedArgs),
    /// Outer/inner iteration tradeoff across uniform loading levels
    Sweep(CdmaSweepArgs),
}

/// Instance parameters shared by the CDMA experiments.
#[derive(Args)]
pub struct CdmaShared {
    /// Chip sequence length
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// Number of users
    #[arg(long, default_value_t = 64)]
    pub k: usize,
    /// Noise variance
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Spreading::Binary)]
    pub spreading: Spreading,
}

#[derive(Args)]
pub struct CdmaDivergeArgs {
    #[command(flatten)]
    pub cdma: CdmaShared,
    /// Sweep budget
    #[arg(long, default_value_t = 200)]
    pub max_inner: usize,
    /// Message-change convergence tolerance
    #[arg(long, default_value_t = 1e-10)]
    pub inner_tol: f64,
    /// Message magnitude that counts as divergence
    #[arg(long, default_value_t = 1e12)]
    pub divergence_bound: f64,
    /// Emit hard symbol decisions sign(x) in the report
    #[arg(long)]
    pub detect: bool,
    /// Write the JSON run report here (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the per-iteration estimate trace here
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args)]
pub struct CdmaFixedArgs {
    #[command(flatten)]
    pub cdma: CdmaShared,
    /// Loaded solver to run
    #[arg(long, value_enum, default_value_t = FixedMode::Double)]
    pub mode: FixedMode,
    /// Emit hard symbol decisions sign(x) in the report
    #[arg(long)]
    pub detect: bool,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixedMode {
    Double,
    Single,
}

#[derive(Args)]
pub struct CdmaSweepArgs {
    #[command(flatten)]
    pub cdma: CdmaShared,
    /// Smallest loading level, in units of the diagonally-dominant level
    #[arg(long, default_value_t = 0.2)]
    pub grid_min: f64,
    /// Largest loading level
    #[arg(long, default_value_t = 3.0)]
    pub grid_max: f64,
    /// Number of log-spaced grid points
    #[arg(long, default_value_t = 12)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub inner_tol: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub outer_tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_inner: usize,
    #[arg(long, default_value_t = 2_000)]
    pub max_outer: usize,
    /// Write the JSON run report here
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the tradeoff table here (default: stdout)
    #[arg(long)]
    pub trace: Option<PathBuf>,
}
