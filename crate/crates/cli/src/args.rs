use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hgml_core::{FeatureMode, SelectMode};

#[derive(Debug, Parser)]
#[command(name = "hgml", version, about = "Rectangle-model features versus raw dimensions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a two-cluster synthetic dataset and start a run.
    Synth(SynthArgs),
    /// Load a CSV dataset with a schema file and start a run.
    Ingest(IngestArgs),
    /// Rank dimension pairs by correlation and pick the annotation pairs.
    Pairs(PairsArgs),
    /// Serve annotation tasks over HTTP.
    Serve(ServeArgs),
    /// Produce accepted models with the synthetic annotator.
    AutoAnnotate(AutoAnnotateArgs),
    /// Turn accepted models into feature matrices.
    Featurize(FeaturizeArgs),
    /// Fit one boosted-tree model with fixed parameters.
    Train(TrainArgs),
    /// Tune and compare raw dimensions against model features.
    Compare(CompareArgs),
    /// Print stored comparison results as a table.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub annotation_train: Option<usize>,
    #[arg(long)]
    pub annotation_valid: Option<usize>,
    #[arg(long)]
    pub annotation_test: Option<usize>,
    /// Learner training rows; the rest are held out for the final test.
    #[arg(long)]
    pub m_prime: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Total dimensions.
    #[arg(long)]
    pub d: usize,
    /// Label-bearing dimensions.
    #[arg(long)]
    pub informative: usize,
    /// Samples per class.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub spread: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "runs")]
    pub runs: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Keep the original class ratio instead of downsampling the majority.
    #[arg(long)]
    pub no_balance: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "runs")]
    pub runs: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run directory created by `synth` or `ingest`.
    #[arg(long)]
    pub run: PathBuf,
    /// Must match the run's seed when given.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PairsArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value = "sample", value_parser = parse_select_mode)]
    pub mode: SelectMode,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Serve a run directory.
    #[arg(long, conflicts_with = "config")]
    pub run: Option<PathBuf>,
    /// Serve from a key-value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0.0)]
    pub min_coverage: f64,
    /// Pairs drawn when the run has no pairs file.
    #[arg(long, default_value_t = 10)]
    pub pool: usize,
    #[arg(long, default_value_t = 3)]
    pub tasks_per_pair: usize,
    #[arg(long, default_value_t = 1800)]
    pub idle_timeout_secs: u64,
}

#[derive(Debug, Args)]
pub struct AutoAnnotateArgs {
    /// Run directory; annotate in-process against its splits.
    #[arg(long, required_unless_present = "server")]
    pub run: Option<PathBuf>,
    /// Act as a worker against a running service instead.
    #[arg(long)]
    pub server: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stop after this many accepted models.
    #[arg(long, default_value_t = 20)]
    pub models: usize,
    /// Pairs to sample when the run has no pairs file.
    #[arg(long, default_value_t = 10)]
    pub pairs: usize,
    /// Annotator attempts per pair, each with its own seed.
    #[arg(long, default_value_t = 10)]
    pub per_pair: usize,
    #[arg(long, default_value_t = 8)]
    pub max_rectangles: usize,
    #[arg(long, default_value_t = 16)]
    pub grid_resolution: usize,
    #[arg(long, default_value_t = 0.7)]
    pub target_accuracy: f64,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0.0)]
    pub min_coverage: f64,
    /// Keep models already in the run's store.
    #[arg(long)]
    pub append: bool,
    #[arg(long, default_value = "synthetic")]
    pub worker: String,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value = "literal", value_parser = parse_feature_mode)]
    pub mode: FeatureMode,
    /// Model store to read instead of the run's own.
    #[arg(long)]
    pub models: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Arm {
    Raw,
    Features,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value = "features")]
    pub arm: Arm,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 2)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 100)]
    pub rounds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridChoice {
    /// 4 learning rates x 4 depths x 5 round counts.
    Full,
    /// 2 x 2 x 2 points for quick runs.
    Reduced,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value = "full")]
    pub grid: GridChoice,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Worker threads for tuning (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = "literal", value_parser = parse_feature_mode)]
    pub mode: FeatureMode,
    #[arg(long)]
    pub models: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories holding a comparison report.
    #[arg(long = "run", required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub csv: bool,
}

fn parse_feature_mode(s: &str) -> Result<FeatureMode, String> {
    s.parse().map_err(|e: hgml_core::Error| e.to_string())
}

fn parse_select_mode(s: &str) -> Result<SelectMode, String> {
    s.parse().map_err(|e: hgml_core::Error| e.to_string())
}
