//! Command-line surface. Every flag can also come from a `PLUME_*`
//! environment variable; both override the config file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use plume::data::Dtype;
use plume::losses::Guidance;
use plume::perturbator::StrategyKind;
use plume::trainer::ClrPolicy;

#[derive(Debug, Parser)]
#[command(name = "plume", version, about = "One-class anomaly detection on frozen features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train `runs` seeds and keep the best-AUC classifier of each.
    Train(TrainArgs),
    /// Score a feature file with a saved checkpoint.
    Eval(EvalArgs),
    /// Run the perturbation × guidance grid.
    Ablate(AblateArgs),
    /// Write Gaussian blob features.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// TOML file with training keys and paths.
    #[arg(long, env = "PLUME_CONFIG")]
    pub config: Option<PathBuf>,
    /// PLMF or CSV file; only normal-class rows are used.
    #[arg(long, env = "PLUME_TRAIN_FEATURES")]
    pub train_features: Option<PathBuf>,
    #[arg(long, env = "PLUME_VAL_FEATURES")]
    pub val_features: Option<PathBuf>,
    #[arg(long, env = "PLUME_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Labels merged into the normal class.
    #[arg(long, env = "PLUME_NORMAL_CLASSES", value_delimiter = ',')]
    pub normal_classes: Option<Vec<i32>>,
    /// Zero-based label column of CSV inputs (default: last).
    #[arg(long, env = "PLUME_LABEL_COLUMN")]
    pub label_column: Option<usize>,
}

/// One optional flag per training hyperparameter.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainOverrides {
    #[arg(long, env = "PLUME_DIM")]
    pub dim: Option<usize>,
    #[arg(long, env = "PLUME_HIDDEN1")]
    pub hidden1: Option<usize>,
    #[arg(long, env = "PLUME_HIDDEN2")]
    pub hidden2: Option<usize>,
    #[arg(long, alias = "batch_size", env = "PLUME_BATCH_SIZE")]
    pub batch_size: Option<usize>,
    #[arg(long, env = "PLUME_EPOCHS")]
    pub epochs: Option<usize>,
    #[arg(long, env = "PLUME_LAMBDA")]
    pub lambda: Option<f64>,
    #[arg(long, env = "PLUME_NU")]
    pub nu: Option<f64>,
    #[arg(long, env = "PLUME_GAMMA")]
    pub gamma: Option<f64>,
    #[arg(long, env = "PLUME_TAU")]
    pub tau: Option<f64>,
    #[arg(long, env = "PLUME_STRATEGY")]
    pub strategy: Option<StrategyKind>,
    #[arg(long, alias = "gaussian_sigma", env = "PLUME_GAUSSIAN_SIGMA")]
    pub gaussian_sigma: Option<f64>,
    #[arg(long, env = "PLUME_GUIDANCE")]
    pub guidance: Option<Guidance>,
    #[arg(long, env = "PLUME_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "PLUME_RUNS")]
    pub runs: Option<usize>,
    #[arg(long, env = "PLUME_BETA1")]
    pub beta1: Option<f64>,
    #[arg(long, env = "PLUME_BETA2")]
    pub beta2: Option<f64>,
    #[arg(long, alias = "adam_eps", env = "PLUME_ADAM_EPS")]
    pub adam_eps: Option<f64>,
    #[arg(long, alias = "weight_decay", env = "PLUME_WEIGHT_DECAY")]
    pub weight_decay: Option<f64>,
    #[arg(long, alias = "base_lr", env = "PLUME_BASE_LR")]
    pub base_lr: Option<f64>,
    #[arg(long, alias = "max_lr", env = "PLUME_MAX_LR")]
    pub max_lr: Option<f64>,
    #[arg(long, alias = "step_size_epochs", env = "PLUME_STEP_SIZE_EPOCHS")]
    pub step_size_epochs: Option<f64>,
    #[arg(long, alias = "clr_policy", env = "PLUME_CLR_POLICY")]
    pub clr_policy: Option<ClrPolicy>,
    #[arg(long, env = "PLUME_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub overrides: TrainOverrides,
    /// Also write each best classifier's validation embeddings as PLMF.
    #[arg(long, env = "PLUME_DUMP_EMBEDDINGS")]
    pub dump_embeddings: bool,
    /// Also write the final model of each run, perturbator included.
    #[arg(long, env = "PLUME_SAVE_TRAINING_STATE")]
    pub save_training_state: bool,
    /// Suppress per-epoch progress on stderr.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long, env = "PLUME_CHECKPOINT")]
    pub checkpoint: PathBuf,
    /// PLMF or CSV file to score.
    #[arg(long, env = "PLUME_FEATURES")]
    pub features: PathBuf,
    /// Defaults to the normal classes stored in the checkpoint.
    #[arg(long, env = "PLUME_NORMAL_CLASSES", value_delimiter = ',')]
    pub normal_classes: Option<Vec<i32>>,
    #[arg(long, env = "PLUME_LABEL_COLUMN")]
    pub label_column: Option<usize>,
    /// Score dump (CSV: row, score, is_normal). Default: `<checkpoint>.scores.csv`.
    #[arg(long, env = "PLUME_SCORES")]
    pub scores: Option<PathBuf>,
    /// Print the result as one JSON object.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub overrides: TrainOverrides,
    #[arg(long, env = "PLUME_STRATEGIES", value_delimiter = ',')]
    pub strategies: Option<Vec<StrategyKind>>,
    #[arg(long, env = "PLUME_GUIDANCES", value_delimiter = ',')]
    pub guidances: Option<Vec<Guidance>>,
    /// One column per class, each trained as the sole normal class.
    /// Default: a single column for `normal_classes`.
    #[arg(long, env = "PLUME_CLASSES", value_delimiter = ',')]
    pub classes: Option<Vec<i32>>,
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, env = "PLUME_OUT")]
    pub out: PathBuf,
    #[arg(long, env = "PLUME_DIM", default_value_t = 32)]
    pub dim: usize,
    #[arg(long, env = "PLUME_N_NORMAL", default_value_t = 1000)]
    pub n_normal: usize,
    #[arg(long, env = "PLUME_N_ANOMALY", default_value_t = 0)]
    pub n_anomaly: usize,
    #[arg(long, env = "PLUME_SEPARATION", default_value_t = 6.0)]
    pub separation: f64,
    /// `iso:<std>` or `aniso:<max_std>:<min_std>`.
    #[arg(long, env = "PLUME_NORMAL_COV", default_value = "iso:1")]
    pub normal_cov: String,
    #[arg(long, env = "PLUME_ANOMALY_COV", default_value = "iso:1")]
    pub anomaly_cov: String,
    #[arg(long, env = "PLUME_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Independent sample stream over the same geometry.
    #[arg(long, env = "PLUME_STREAM", default_value_t = 0)]
    pub stream: u64,
    #[arg(long, env = "PLUME_DTYPE", default_value = "f64")]
    pub dtype: Dtype,
}
