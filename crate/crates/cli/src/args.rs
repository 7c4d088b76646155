use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "motifpool", version, about = "Motif-based graph clustering and pooling experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset and write it as edge list + features + labels (or TU files).
    GenData(GenDataArgs),
    /// Unsupervised node clustering over a seed sweep.
    Cluster(ClusterArgs),
    /// Supervised graph classification over a seed sweep.
    Classify(RunArgs),
    /// Motif adjacency of an edge-list graph.
    Motif(MotifArgs),
    /// Clustering metrics of a predicted labelling.
    Metrics(MetricsArgs),
    /// Check the motif identities against exhaustive enumeration.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Directory receiving every artifact; created if absent.
    #[arg(long, env = "MOTIFPOOL_OUT", default_value = "results")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON file with experiment config fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config field, e.g. `--set mu=0.1` or `--set dataset.seed=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// `N` runs seeds 0..N; `a,b,c` runs exactly those.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Pooler: hosc, hp1, hp2, mincut, random, nopool.
    #[arg(long)]
    pub pooler: Option<String>,
    /// Seeds trained in parallel.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// MP-Pool-MP-Pool with a composed assignment.
    #[arg(long)]
    pub two_layer: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DatasetKind {
    Syn1,
    Syn2,
    Syn3,
    Karate,
    Gc,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, value_enum)]
    pub dataset: DatasetKind,
    /// Override a generator parameter, e.g. `--set nodes=500`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// File-name prefix for graph collections.
    #[arg(long, default_value = "GC")]
    pub name: String,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MotifKind {
    Edge,
    Triangle,
    FourCycle,
    K4,
}

#[derive(Debug, Args)]
pub struct MotifArgs {
    /// Edge list, one `i j [w]` per line.
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long, value_enum, default_value = "triangle")]
    pub motif: MotifKind,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Predicted cluster per node, one per line.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth label per node, one per line.
    #[arg(long)]
    pub truth: PathBuf,
    /// Edge list enabling modularity and conductance.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Random graphs per oracle.
    #[arg(long, default_value_t = 50)]
    pub graphs: usize,
    /// Nodes per graph.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}
