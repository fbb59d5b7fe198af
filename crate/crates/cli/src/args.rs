use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Simulate and reconstruct overlapping-window SPAD captures.
#[derive(Debug, Parser)]
#[command(name = "spadscan", version, about, long_about = None)]
pub struct Cli {
    /// TOML file merged over the base profile. Keys mirror the profile
    /// structure; an optional top-level `base` names the built-in profile.
    #[arg(long, global = true, env = "SPADSCAN_CONFIG")]
    pub config: Option<PathBuf>,

    /// Built-in base profile: `reference` or `desk`.
    #[arg(long, global = true, default_value = "reference")]
    pub profile: String,

    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Suppress progress messages on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Draw a histogram cube from a scene.
    Simulate(SimulateArgs),
    /// Recover reflectivity from a cube.
    ReconstructIntensity(IntensityArgs),
    /// Recover per-pixel depth from a cube.
    ReconstructDepth(DepthArgs),
    /// Evaluate a reconstruction metric over a parameter grid.
    Sweep(SweepArgs),
    /// Report noise-only, leakage-only and scanning photon statistics.
    Calibrate(CalibrateArgs),
    /// Score existing outputs against ground truth.
    Metrics(MetricsArgs),
    /// Re-run the command recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

/// Settings shared by the commands that build an illumination operator.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ScanArgs {
    /// Illumination window side length.
    #[arg(long)]
    pub window: Option<usize>,
    /// Off-state mirror leakage fraction.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Scene file; defaults to the profile's ball phantom.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub scan: ScanArgs,
    /// Also write the cube as CSV.
    #[arg(long)]
    pub csv: bool,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct IntensityArgs {
    /// Histogram cube written by `simulate`.
    #[arg(long)]
    pub cube: PathBuf,
    /// Ground-truth scene; enables the metrics table.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub scan: ScanArgs,
    /// Denoising weight.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Deconvolution weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Iteration cap for both solves.
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DepthArgs {
    #[arg(long)]
    pub cube: PathBuf,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub scan: ScanArgs,
    /// Per-slice TV weight.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Temporal median order (odd).
    #[arg(long)]
    pub median_order: Option<usize>,
    /// Iteration cap per slice.
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Intensity,
    Depth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    /// Denoising weight (intensity) or slice weight (depth).
    Mu,
    /// Deconvolution weight (intensity only).
    Lambda,
    /// Illumination window size.
    W,
    /// Median order (depth only).
    N,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub pipeline: Pipeline,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', num_args = 1.., conflicts_with = "log_range")]
    pub values: Vec<f64>,
    /// `lo:hi:points`, evenly spaced in log.
    #[arg(long)]
    pub log_range: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[command(flatten)]
    pub scan: ScanArgs,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Leakage-only photons per pixel to calibrate `epsilon` against.
    #[arg(long, default_value_t = 25.8)]
    pub target_leakage: f64,
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[command(flatten)]
    pub scan: ScanArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MetricsArgs {
    /// Cube to summarise.
    #[arg(long)]
    pub cube: Option<PathBuf>,
    /// Ground-truth scene.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// `intensity.csv` from `reconstruct-intensity`.
    #[arg(long, requires = "truth")]
    pub intensity: Option<PathBuf>,
    /// `depth.csv` from `reconstruct-depth`.
    #[arg(long, requires = "truth")]
    pub depth: Option<PathBuf>,
    #[command(flatten)]
    pub scan: ScanArgs,
    /// Output directory for `metrics.csv`; the table is always printed.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// `manifest.json` of an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}
