use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "idla", version, about = "Internal DLA experiments on Z^d")]
pub struct Cli {
    /// Line-oriented `key = value` file supplying defaults for the subcommand flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Trial-parallelism width (default: available parallelism).
    #[arg(long, global = true, env = "IDLA_THREADS")]
    pub threads: Option<usize>,
    /// Directory receiving data files and manifests.
    #[arg(long, global = true, env = "IDLA_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grow one cluster and dump it.
    Grow(GrowArgs),
    /// Error radii over many clusters, one row per (n, trial).
    Scan(ScanArgs),
    /// Large-deviation probes.
    Probe {
        #[command(subcommand)]
        kind: ProbeKind,
    },
    /// Exact Green's function, mean-value gaps and the potential kernel.
    Greens {
        #[command(subcommand)]
        kind: GreensKind,
    },
    /// Exponential tail bounds and their Monte Carlo validation.
    Tails {
        #[command(subcommand)]
        kind: TailsKind,
    },
    /// Grow by waves and report paused counts and tile statistics.
    Waves(WavesArgs),
    /// Coupled flashing / plain runs.
    Flash(FlashArgs),
    /// Randomized shell subdivisions.
    Subdivide(SubdivideArgs),
    /// Collect scan and probe summaries from a directory into tables.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct Seeded {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct GrowArgs {
    #[arg(long)]
    pub dim: usize,
    /// Grow `|B(0,n)|` explorers from the origin.
    #[arg(long, conflicts_with = "count")]
    pub n: Option<f64>,
    /// Grow this many explorers from the origin.
    #[arg(long)]
    pub count: Option<u64>,
    /// Freeze explorers on the boundary of `B(0, r)`.
    #[arg(long)]
    pub stop_radius: Option<f64>,
    #[command(flatten)]
    pub seeded: Seeded,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ScanArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n_list: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    #[command(flatten)]
    pub seeded: Seeded,
}

#[derive(Debug, Subcommand)]
pub enum ProbeKind {
    /// Non-covering of `B(0,R)` by `A·R^d` explorers started in `B(0,R/2)`.
    Covering(CoveringArgs),
    /// The origin joining the cluster of `β·R^d` explorers started on `∂B(0,R)`.
    Origin(OriginArgs),
    /// Annulus crossing among traps.
    Traps(TrapArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CoveringPlacementArg {
    UniformHalfBall,
    Origin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OriginPlacementArg {
    Stacked,
    UniformBoundary,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct CoveringArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub radius: f64,
    #[arg(long = "a", value_delimiter = ',', required = true)]
    pub a: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value_t = idla_core::experiments::DEFAULT_COVERING_ALPHA)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = CoveringPlacementArg::UniformHalfBall)]
    pub placement: CoveringPlacementArg,
    #[command(flatten)]
    pub seeded: Seeded,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct OriginArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub radius: Vec<f64>,
    #[arg(long, default_value_t = idla_core::experiments::DEFAULT_ORIGIN_BETA)]
    pub beta: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, value_enum, default_value_t = OriginPlacementArg::Stacked)]
    pub placement: OriginPlacementArg,
    #[command(flatten)]
    pub seeded: Seeded,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TrapArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub radius: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub density: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    /// Shell height of the inward partition, in lattice units.
    #[arg(long, default_value_t = idla_core::flashing::DEFAULT_TRAP_HEIGHT)]
    pub height: f64,
    #[command(flatten)]
    pub seeded: Seeded,
}

#[derive(Debug, Subcommand)]
pub enum GreensKind {
    /// `G_n(y, z)` and the hitting probability of `z` from `y`.
    Value(GreenValueArgs),
    /// Mean-value gaps for `R = n` over a range of `n`.
    MeanValue(MeanValueArgs),
    /// Potential kernel table against its asymptotic form (d = 2).
    Kernel(KernelArgs),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct GreenValueArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub n: f64,
    /// Comma-separated coordinates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub y: Vec<i32>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub z: Vec<i32>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct MeanValueArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub n_min: u32,
    #[arg(long, default_value_t = 30)]
    pub n_max: u32,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct KernelArgs {
    #[arg(long = "box", default_value_t = idla_core::greens::DEFAULT_KERNEL_BOX)]
    pub box_half: i32,
    #[arg(long, default_value_t = idla_core::greens::DEFAULT_KERNEL_RANGE)]
    pub range: i32,
    #[arg(long, default_value_t = 5.0)]
    pub rmin: f64,
    #[arg(long, default_value_t = 20.0)]
    pub rmax: f64,
    /// Directory for the cached kernel table.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TailsKind {
    Lower(BoundArgs),
    Upper(BoundArgs),
    /// Monte Carlo check of both bounds on the built-in fifty-cell grid.
    Grid(TailGridArgs),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct BoundArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub mu: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub xi: f64,
    #[arg(long, default_value_t = 0.0)]
    pub c: f64,
    #[arg(long, default_value_t = 2.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0.0)]
    pub s2: f64,
    #[arg(long, conflicts_with = "optimize")]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub optimize: bool,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TailGridArgs {
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[command(flatten)]
    pub seeded: Seeded,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct WavesArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub n: f64,
    /// Wave whose tiles get `W` and `μ` statistics.
    #[arg(long)]
    pub tiles: Option<usize>,
    /// Exclusion distance, in multiples of the shell height.
    #[arg(long, default_value_t = 0.0)]
    pub l: f64,
    /// Monte Carlo trials for `μ` when the exact domain exceeds the budget.
    #[arg(long)]
    pub mc_trials: Option<u64>,
    #[command(flatten)]
    pub seeded: Seeded,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct FlashArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub n: f64,
    /// Shell height (default: `log n` in d = 2, `sqrt(log n)` above).
    #[arg(long)]
    pub height: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub trials: u64,
    #[arg(long)]
    pub settle_on_return: bool,
    #[command(flatten)]
    pub seeded: Seeded,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SubdivideArgs {
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long)]
    pub radius: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// `|η|`; defaults to the largest value the precondition allows.
    #[arg(long)]
    pub total: Option<u64>,
    /// Number of synthetic runs with `N_k` uniform on `[floor(h_k), |η|]`.
    #[arg(long, default_value_t = 1000)]
    pub runs: u64,
    /// Drive the counts from a cluster dump instead.
    #[arg(long, conflicts_with = "runs")]
    pub cluster: Option<PathBuf>,
    /// Ball center for `--cluster`, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<i32>>,
    #[command(flatten)]
    pub seeded: Seeded,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ReportArgs {
    /// Directory holding `scan_summary.json` and `probe_*.json` files.
    #[arg(long)]
    pub in_dir: Option<PathBuf>,
}
