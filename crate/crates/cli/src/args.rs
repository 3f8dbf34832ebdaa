use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sfc_core::Radius;

#[derive(Debug, Parser)]
#[command(
    name = "sfc",
    version,
    about = "Normalized-cut segmentation accelerated by edge-preserving filters"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalized cut with the exact pixel affinity.
    Ncut(NcutArgs),
    /// Normalized cut through the bilateral grid.
    FastNcut(SegmentArgs),
    /// Conditioned (patch-affinity) cut through the NLM operator.
    CondNcut(CondArgs),
    /// Apply a filter and write the result.
    Filter(FilterArgs),
    /// Dense oracle against the fast path on one image.
    Compare(CompareArgs),
    /// Windowed baseline against the grid path on synthetic images.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DiscretizeArg {
    Kmeans,
    Twoway,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterMethod {
    Bilateral,
    BilateralBrute,
    Nlm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FastPipeline {
    Ncut,
    FastNcut,
}

/// Positive integer, or `inf` / `unbounded` for no cutoff.
pub fn parse_radius(s: &str) -> Result<Radius, String> {
    match s {
        "inf" | "unbounded" => Ok(Radius::Unbounded),
        _ => match s.parse::<usize>() {
            Ok(0) => Err("radius must be at least 1".into()),
            Ok(r) => Ok(Radius::Bounded(r)),
            Err(e) => Err(format!("{e}")),
        },
    }
}

#[derive(Debug, Clone, Args)]
pub struct Spatial {
    /// Spatial sigma in pixels.
    #[arg(long, conflicts_with = "sigma_spatial_frac")]
    pub sigma_spatial: Option<f64>,
    /// Spatial sigma as a fraction of image height [default: 1/32].
    #[arg(long)]
    pub sigma_spatial_frac: Option<f64>,
}

impl Spatial {
    pub fn resolve(&self, height: usize) -> f64 {
        self.sigma_spatial
            .unwrap_or_else(|| self.sigma_spatial_frac.unwrap_or(1.0 / 32.0) * height as f64)
    }
}

#[derive(Debug, Clone, Args)]
pub struct PatchArgs {
    #[arg(long, default_value_t = 2)]
    pub patch_radius: usize,
    /// Patch-distance sigma.
    #[arg(long, default_value_t = 0.3)]
    pub sigma_patch: f64,
    #[arg(long, default_value_t = 10)]
    pub search_radius: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub segments: usize,
    /// Nontrivial eigenvectors to compute [default: segments].
    #[arg(long)]
    pub eigvecs: Option<usize>,
    #[command(flatten)]
    pub spatial: Spatial,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_range: f64,
    #[arg(long, value_enum, default_value_t = DiscretizeArg::Kmeans)]
    pub discretize: DiscretizeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub metrics_json: Option<PathBuf>,
    /// Sequential reductions and no wall-clock values in the metrics.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, Args)]
pub struct NcutArgs {
    #[command(flatten)]
    pub common: SegmentArgs,
    /// Window radius, or `inf`.
    #[arg(long, default_value = "15", value_parser = parse_radius)]
    pub radius: Radius,
}

#[derive(Debug, Clone, Args)]
pub struct CondArgs {
    #[command(flatten)]
    pub common: SegmentArgs,
    #[command(flatten)]
    pub patch: PatchArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub method: FilterMethod,
    #[command(flatten)]
    pub spatial: Spatial,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_range: f64,
    /// Window radius for bilateral-brute.
    #[arg(long, default_value_t = 15)]
    pub radius: usize,
    #[command(flatten)]
    pub patch: PatchArgs,
    #[arg(long, default_value_t = 1)]
    pub iterations: usize,
    #[arg(long)]
    pub metrics_json: Option<PathBuf>,
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub segments: usize,
    #[arg(long)]
    pub eigvecs: Option<usize>,
    #[command(flatten)]
    pub spatial: Spatial,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_range: f64,
    /// Pipeline compared against the dense oracle.
    #[arg(long, value_enum, default_value_t = FastPipeline::FastNcut)]
    pub against: FastPipeline,
    #[arg(long, value_enum, default_value_t = DiscretizeArg::Kmeans)]
    pub discretize: DiscretizeArg,
    #[arg(long, default_value_t = 10)]
    pub probes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub metrics_json: Option<PathBuf>,
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Window radius of the brute-force baseline.
    #[arg(long, default_value_t = 15)]
    pub radius: usize,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_range: f64,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub metrics_json: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
