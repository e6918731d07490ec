use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Environment variable naming the default output root.
pub const OUT_ROOT_ENV: &str = "MERGE_GAME_OUT";

#[derive(Debug, Parser)]
#[command(name = "merge-game", version, about = "Dense-traffic merge simulator and planner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one seeded trial and write its trace and summary.
    Simulate(SimulateArgs),
    /// Run the depth by traffic-density grid.
    Ablation(AblationArgs),
    /// Time each pipeline phase over many replans.
    Bench(BenchArgs),
    /// Re-run a previous simulate, ablation or bench run from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML file with [scenario] and [planner] tables; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory. Defaults to a subdirectory of $MERGE_GAME_OUT, or of ./runs.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Spacing noise half-width (m). Scales with the mean gap when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub gap_noise: Option<f64>,
    /// Base seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Mean bumper-to-bumper gap of the target lane (m).
    #[arg(long, allow_hyphen_values = true)]
    pub mean_gap: Option<f64>,
    /// Gap search depth.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Write numbered SVG frames of the trial.
    #[arg(long)]
    pub render: bool,
    /// Simulation steps between rendered frames.
    #[arg(long, default_value_t = 5)]
    pub frame_stride: usize,
}

#[derive(Debug, Args)]
pub struct AblationArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated gap search depths.
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<usize>>,
    /// Comma-separated mean gaps (m).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub gaps: Option<Vec<f64>>,
    /// Trials per cell, on consecutive seeds from --seed.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Comma-separated explicit seeds; overrides --seed and --trials.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Seed batches for the paired-difference intervals.
    #[arg(long)]
    pub batches: Option<usize>,
    /// Largest number of trials run at once.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub mean_gap: Option<f64>,
    /// Depth of the planner driving the benchmark trials.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Replans to sample.
    #[arg(long, default_value_t = 200)]
    pub replans: usize,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
}
