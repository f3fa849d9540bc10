//! One-class anomaly detection on frozen feature vectors.
//!
//! Normal samples are perturbed into pseudo-anomalies by a learned rank-1 map
//! `x̃ = x + α(βᵀx)`, where a small VAE emits `(α, β)` per sample. A classifier
//! is trained to separate the two, optionally with contrastive guidance in its
//! embedding space. All gradients are written by hand.
//!
//! ```no_run
//! use plume::data::{one_class_split, synth_blobs, FeatureDataset, SynthSpec};
//! use plume::trainer::{fit, TrainConfig};
//!
//! let spec = SynthSpec { n_anomaly: 0, ..SynthSpec::default() };
//! let train = synth_blobs(&spec)?;
//! let val = synth_blobs(&SynthSpec { n_normal: 500, n_anomaly: 500, stream: 1, ..spec })?;
//! let split = one_class_split(&FeatureDataset::from_files(&train, &val)?, &[0])?;
//! let config = TrainConfig { dim: 32, epochs: 30, ..TrainConfig::default() };
//! let outcome = fit(&split, &config, 0)?;
//! println!("best AUC {:.4} at epoch {}", outcome.report.best_auc, outcome.report.best_epoch);
//! # Ok::<(), plume::PlumeError>(())
//! ```

pub mod classifier;
pub mod data;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod perturbator;
pub mod rng;
pub mod tensor;
pub mod trainer;

pub use classifier::{Classifier, ClassifierShape};
pub use error::{PlumeError, Result};
pub use losses::{Guidance, LossBreakdown, LossWeights};
pub use metrics::{roc_auc, roc_auc_from, ScoredSample};
pub use model::{PlumeModel, StepNoise};
pub use perturbator::{PerturbationStrategy, Perturbator, StrategyKind};
pub use tensor::Matrix;
pub use trainer::{fit, Checkpoint, EpochRecord, FitOutcome, RunReport, TrainConfig};
