use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "hepflow", version, about = "Phase-space generation, integration, likelihood fits and sWeights")]
pub struct Cli {
    /// Worker threads for data-parallel steps; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Seed for all random streams.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// File of `key = value` lines supplying flags not given on the command line.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate n-body phase-space events.
    Phsp(PhspArgs),
    /// Integrate a built-in test function.
    Integrate(IntegrateArgs),
    /// Extended maximum-likelihood fit of a built-in model to CSV data.
    Fit(FitArgs),
    /// Generate-and-fit toy study.
    Toys(ToysArgs),
    /// sWeights for a fitted model.
    Splot(SplotArgs),
    /// Sample a dataset from a built-in model.
    Generate(GenerateArgs),
    /// Histogram one CSV column, optionally weighted.
    Hist(HistArgs),
    /// Time a parallel kernel at several worker counts.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct PhspArgs {
    /// Mother mass; the mother is at rest.
    #[arg(long)]
    pub mother_mass: f64,
    /// Daughter masses, comma-separated.
    #[arg(long)]
    pub masses: String,
    #[arg(long)]
    pub events: usize,
    /// Accept-reject to unit weights against the maximum-weight bound.
    #[arg(long)]
    pub unweight: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Plain,
    Vegas,
    Gk,
    GkAdaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Integrand {
    /// Product of normalized Gaussians with `--mean` and `--sigma` in every dimension.
    Gauss,
    /// Product of `x^exponent` over dimensions.
    Pow,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long, value_enum, default_value = "gauss")]
    pub integrand: Integrand,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Calls per iteration (plain and VEGAS); ignored by quadrature.
    #[arg(long, default_value_t = 10_000)]
    pub calls: u64,
    /// VEGAS iterations.
    #[arg(long, default_value_t = 5)]
    pub iterations: usize,
    /// Integration range `lo,hi`, the same in every dimension.
    #[arg(long, default_value = "0,1")]
    pub range: String,
    #[arg(long, default_value_t = 0.5)]
    pub mean: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 2.0)]
    pub exponent: f64,
    /// VEGAS grid damping exponent.
    #[arg(long, default_value_t = 1.5)]
    pub alpha: f64,
    /// VEGAS bins per dimension.
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Relative tolerance of adaptive quadrature.
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,
    /// Panel limit of adaptive quadrature.
    #[arg(long, default_value_t = 1000)]
    pub max_intervals: usize,
}

/// Model selection shared by the fitting subcommands.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// `gauss`, `exp` or `gauss+exp`.
    #[arg(long, default_value = "gauss+exp")]
    pub model: String,
    /// Observable range `lo,hi`; also the normalization range.
    #[arg(long)]
    pub range: String,
    /// Parameter values `name=value,...`; start values for fits, truth for generation.
    #[arg(long, default_value = "")]
    pub init: String,
    /// Parameters held fixed, comma-separated.
    #[arg(long, default_value = "")]
    pub fix: String,
    /// Name of the observable column.
    #[arg(long, default_value = "x")]
    pub column: String,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 2000)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct ToysArgs {
    /// Number of toys.
    #[arg(long = "n")]
    pub n: usize,
    /// Expected events per toy; default yields split it evenly.
    #[arg(long)]
    pub events: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Use exactly the truth yields instead of Poisson counts.
    #[arg(long)]
    pub no_fluctuate: bool,
    #[arg(long, default_value_t = 2000)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct SplotArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Fit-result CSV produced by `fit`.
    #[arg(long)]
    pub fit_result: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Prefix the sWeight columns with the input columns.
    #[arg(long)]
    pub with_input: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Expected events; default yields split it evenly.
    #[arg(long)]
    pub events: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Draw Poisson counts around the yields instead of exactly the yields.
    #[arg(long)]
    pub fluctuate: bool,
}

#[derive(Debug, Args)]
pub struct HistArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub column: String,
    #[arg(long)]
    pub bins: usize,
    /// Histogram range `lo,hi`; the last bin includes `hi`.
    #[arg(long)]
    pub range: String,
    /// Column of per-row weights.
    #[arg(long)]
    pub weight: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kernel {
    /// Extended NLL of a Gaussian+exponential model.
    Nll,
    /// Three-body phase-space generation.
    Phsp,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "nll")]
    pub kernel: Kernel,
    /// Worker counts to time, comma-separated.
    #[arg(long, default_value = "1,2,4,8")]
    pub worker_counts: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub events: usize,
    /// Timed runs per worker count; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    pub repeat: usize,
    /// Kernel evaluations per timed run.
    #[arg(long, default_value_t = 10)]
    pub evals: usize,
}
