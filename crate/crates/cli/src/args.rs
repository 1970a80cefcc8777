use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Learn noisy-OR Bayesian networks with perturb-and-max-product.
#[derive(Parser, Debug)]
#[command(name = "norbn", version, about)]
pub struct Cli {
    /// File of `key=value` lines supplying default flag values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (defaults to the available cores)
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Seed for all randomness
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Record wall-clock update times in history files
    #[arg(long, global = true)]
    pub timing: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset with its ground truth
    #[command(subcommand)]
    Generate(GenerateKind),
    /// Build a layered topology from a dataset
    BuildGraph(BuildGraphArgs),
    /// Train a network
    #[command(subcommand)]
    Train(TrainMethod),
    /// Evaluate a trained network
    Eval(EvalArgs),
    /// Draw posterior samples or modes for each input row
    Sample(SampleArgs),
}

#[derive(Subcommand, Debug)]
pub enum GenerateKind {
    /// Binary matrix factorization
    Bmf(GenBmfArgs),
    /// Binary 2D blind deconvolution
    Bd(GenBdArgs),
    /// Line features sampled from a bipartite network
    Ovpm(GenOvpmArgs),
}

#[derive(Args, Debug)]
pub struct GenBmfArgs {
    /// Rows of each split
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Inner dimension
    #[arg(long, default_value_t = 20)]
    pub r: usize,
    /// Columns (defaults to n)
    #[arg(long)]
    pub p: Option<usize>,
    /// Target density of X
    #[arg(long, default_value_t = 0.25)]
    pub px: f64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GenBdArgs {
    #[arg(long, default_value_t = 100)]
    pub n_images: usize,
    #[arg(long, default_value_t = 10)]
    pub act_h: usize,
    #[arg(long, default_value_t = 10)]
    pub act_w: usize,
    #[arg(long, default_value_t = 0.01)]
    pub activation_prob: f64,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GenOvpmArgs {
    #[arg(long, default_value_t = 9000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_test: usize,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BuildGraphArgs {
    /// NBIN dataset
    #[arg(long)]
    pub data: PathBuf,
    /// Layers below the leak, the visible layer included
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    /// Children per parent when sizing the layer above
    #[arg(long, default_value_t = 3)]
    pub ratio: usize,
    /// Parents of each non-top node
    #[arg(long, default_value_t = 5)]
    pub parents: usize,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum TrainMethod {
    /// Max-product training
    Mp(TrainArgs),
    /// Mean-field variational training
    Vi(TrainArgs),
    /// Max-product training followed by mean-field refinement
    Hybrid(TrainArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Problem {
    Bmf,
    Bd,
    Ovpm,
}

/// Network structure shared by `train`, `eval` and `sample`.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Topology file from `build-graph`
    #[arg(long, conflicts_with = "problem")]
    pub graph: Option<PathBuf>,
    /// Problem encoder
    #[arg(long, value_enum)]
    pub problem: Option<Problem>,
    /// Hidden units of a bipartite problem
    #[arg(long, default_value_t = 20)]
    pub hidden: usize,
    /// Learned features of a deconvolution problem
    #[arg(long, default_value_t = 5)]
    pub n_feat: usize,
    #[arg(long, default_value_t = 6)]
    pub feat_h: usize,
    #[arg(long, default_value_t = 6)]
    pub feat_w: usize,
    #[arg(long, default_value_t = 14)]
    pub image_h: usize,
    #[arg(long, default_value_t = 14)]
    pub image_w: usize,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// NBIN training data
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Start from this checkpoint instead of a fresh initialization
    #[arg(long)]
    pub init_model: Option<PathBuf>,
    /// Initialization scheme 1..=4
    #[arg(long, default_value_t = 1)]
    pub init: u8,
    /// Gradient steps (`mp` and `vi`)
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Max-product steps of `hybrid`
    #[arg(long, default_value_t = 1000)]
    pub mp_steps: usize,
    /// Mean-field steps of `hybrid`
    #[arg(long, default_value_t = 500)]
    pub vi_steps: usize,
    #[arg(long, default_value_t = 20)]
    pub batch_size: usize,
    /// Use the whole dataset as one batch
    #[arg(long)]
    pub full_batch: bool,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Perturbation temperature of training queries
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub clip_eps: f64,
    /// Max-product iterations per query
    #[arg(long, default_value_t = 100)]
    pub n_iters: usize,
    #[arg(long, default_value_t = 0.5)]
    pub damping: f64,
    /// Inner optimizer steps of the mean-field posterior
    #[arg(long, default_value_t = 50)]
    pub vi_inner_steps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub vi_lr: f64,
    /// Output directory for `model.norbn`, `adam.txt` and `history.csv`
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    TestRe,
    FeaturesIou,
    Recovery,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// NBIN test data
    #[arg(long)]
    pub data: PathBuf,
    /// Ground-truth sidecar from `generate`
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Problem metrics to compute (defaults to those of the sidecar kind)
    #[arg(long, value_enum, value_delimiter = ',')]
    pub metrics: Vec<Metric>,
    /// Learned deconvolution feature geometry
    #[arg(long, default_value_t = 5)]
    pub n_feat: usize,
    #[arg(long, default_value_t = 6)]
    pub feat_h: usize,
    #[arg(long, default_value_t = 6)]
    pub feat_w: usize,
    #[arg(long, default_value_t = 100)]
    pub n_iters: usize,
    #[arg(long, default_value_t = 0.5)]
    pub damping: f64,
    #[arg(long, default_value_t = 50)]
    pub vi_inner_steps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub vi_lr: f64,
    /// Also write per-sample bounds to this CSV
    #[arg(long)]
    pub per_sample: Option<PathBuf>,
    /// Metrics CSV
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// NBIN observations
    #[arg(long)]
    pub data: PathBuf,
    /// 0 gives the posterior mode
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub temperature: f64,
    /// Samples per input row
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 100)]
    pub n_iters: usize,
    #[arg(long, default_value_t = 0.5)]
    pub damping: f64,
    /// NBIN file of hidden assignments, `count` consecutive rows per input
    #[arg(long, short)]
    pub out: PathBuf,
}
