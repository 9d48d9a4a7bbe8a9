//! `fraclap` — command-line driver for the fractional Laplacian toolkit.
//!
//! Subcommands: `op-error` (truncation studies), `poisson` (fractional
//! Poisson solves), `allen-cahn` (phase-field time stepping), and `stencil`
//! (build/inspect/verify coefficient cache files).
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid configuration
//! (nothing is written), 3 corrupt input file (bad magic bytes).

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags/config; no outputs were produced. Exit 2.
    Validation(String),
    /// An input file failed the magic-byte check. Exit 3.
    Corrupt(String),
    /// The computation or an output write failed. Exit 1.
    Failure(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Corrupt(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Corrupt(m) | CliError::Failure(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "fraclap",
    version,
    about = "Finite difference solvers for the integral fractional Laplacian",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Truncation-error study of the discrete operator on the manufactured function.
    OpError(OpErrorArgs),
    /// Solve the fractional Poisson problem (−Δ)^{α/2} u = f.
    Poisson(PoissonArgs),
    /// March the fractional Allen–Cahn equation (kissing-bubbles benchmark).
    AllenCahn(AllenCahnArgs),
    /// Build, inspect, or verify stencil cache files.
    Stencil(StencilArgs),
}

/// Flags shared by every subcommand. Command-line values override the
/// `--config` JSON document, which overrides built-in defaults.
#[derive(Args)]
pub struct CommonOpts {
    /// JSON configuration file (a manifest.json from a previous run also works).
    #[arg(long, global = false)]
    pub config: Option<PathBuf>,
    /// Output directory (created on success paths only).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Stencil cache directory; defaults to $FRACLAP_CACHE_DIR when set.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Cap the worker thread pool.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Relative tolerance for coefficient quadrature.
    #[arg(long)]
    pub quad_rel_tol: Option<f64>,
    /// Absolute tolerance floor for coefficient quadrature.
    #[arg(long)]
    pub quad_abs_tol: Option<f64>,
    /// Relative residual tolerance for conjugate gradients.
    #[arg(long)]
    pub cg_tol: Option<f64>,
    /// Iteration cap for conjugate gradients.
    #[arg(long)]
    pub cg_max_iter: Option<usize>,
}

#[derive(Args)]
pub struct OpErrorArgs {
    /// Spatial dimension (2 or 3).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Fractional power α ∈ (0, 2).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Splitting parameter γ ∈ (α, 2]; 2 is optimal.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Smoothness exponent of the manufactured solution (s ≥ 1).
    #[arg(long)]
    pub s: Option<f64>,
    /// Comma-separated mesh sizes, exact fractions: 1/16,1/32,1/64.
    #[arg(long)]
    pub h: Option<String>,
    /// Reference mesh size (must divide every h, at least 4× finer).
    #[arg(long)]
    pub ref_h: Option<String>,
    #[command(flatten)]
    pub common: CommonOpts,
}

#[derive(Args)]
pub struct PoissonArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Right-hand side: `manufactured[:s=<v>]` or `one`.
    #[arg(long)]
    pub rhs: Option<String>,
    /// Comma-separated mesh sizes (exact fractions).
    #[arg(long)]
    pub h: Option<String>,
    /// Reference mesh size; required for the manufactured protocol,
    /// optional (enables self-convergence) for f ≡ 1.
    #[arg(long)]
    pub ref_h: Option<String>,
    /// Domain box a0,b0,a1,b1[,a2,b2]; f ≡ 1 only (manufactured runs use (−1,1)^d).
    #[arg(long)]
    pub bounds: Option<String>,
    #[command(flatten)]
    pub common: CommonOpts,
}

#[derive(Args)]
pub struct AllenCahnArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Mesh size (exact fraction), default 1/256.
    #[arg(long)]
    pub h: Option<String>,
    /// Time step τ.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Diffuse interface width δ.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Final time.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Snapshot cadence in steps (0 = initial and final only).
    #[arg(long)]
    pub snapshot_every: Option<usize>,
    /// Bubble centers: `0.4,0.4;0.6,0.6`.
    #[arg(long)]
    pub centers: Option<String>,
    /// Initial bubble radius.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Picard stopping tolerance on the max-norm increment.
    #[arg(long)]
    pub picard_tol: Option<f64>,
    /// Picard iteration cap per step.
    #[arg(long)]
    pub picard_max: Option<usize>,
    /// Domain box (default (0,1)^d).
    #[arg(long)]
    pub bounds: Option<String>,
    #[command(flatten)]
    pub common: CommonOpts,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum StencilAction {
    /// Compute a coefficient table and write it to --file.
    Build,
    /// Print the header and summary statistics of a stencil file.
    Inspect,
    /// Re-derive random entries by fresh quadrature and check the table.
    Verify,
}

#[derive(Args)]
pub struct StencilArgs {
    #[arg(value_enum)]
    pub action: StencilAction,
    /// Stencil file path.
    #[arg(long)]
    pub file: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Kernel extent in cells (table is (N+1)^d).
    #[arg(long)]
    pub n: Option<usize>,
    /// Mesh size (exact fraction).
    #[arg(long)]
    pub h: Option<String>,
    /// Entries re-derived by `verify`.
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    /// RNG seed for `verify` sampling.
    #[arg(long, default_value_t = 20260815)]
    pub seed: u64,
    /// Relative tolerance for `verify`.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[command(flatten)]
    pub common: CommonOpts,
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.cmd {
        Cmd::OpError(a) => commands::cmd_op_error(a),
        Cmd::Poisson(a) => commands::cmd_poisson(a),
        Cmd::AllenCahn(a) => commands::cmd_allen_cahn(a),
        Cmd::Stencil(a) => commands::cmd_stencil(a),
    }
}

fn main() {
    // Die quietly when the read end of a pipe closes (`fraclap ... | head`)
    // instead of panicking on EPIPE.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    if let Err(e) = dispatch(&cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.code());
    }
}
