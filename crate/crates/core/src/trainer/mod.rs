//! The joint training loop, best-model selection and multi-run suites.

pub mod checkpoint;
pub mod config;
pub mod optim;

use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{AdamWConfig, ClrConfig, ClrPolicy, TrainConfig};
pub use optim::{adamw_step, clr_lr_at, OptimizerState};

use crate::classifier::Classifier;
use crate::data::{epoch_indices, OneClassSplit};
use crate::error::{PlumeError, Result};
use crate::losses::{Guidance, LossBreakdown};
use crate::metrics::{aggregate, roc_auc_from};
use crate::model::PlumeModel;
use crate::perturbator::StrategyKind;
use crate::rng::{stream, Stream};
use crate::tensor::Matrix;

/// Validation rows scored per forward pass.
const SCORE_CHUNK: usize = 1024;

/// One line of the metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub run_id: usize,
    pub epoch: usize,
    /// Learning rate at the first iteration of the epoch.
    pub lr: f64,
    pub loss_total: f64,
    pub loss_ce: f64,
    pub loss_n: f64,
    pub loss_kl: f64,
    pub loss_c: f64,
    pub val_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: usize,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub best_auc: f64,
    /// 1-based.
    pub best_epoch: usize,
}

impl RunReport {
    /// Running maximum of the validation AUC after each epoch.
    pub fn best_auc_curve(&self) -> Vec<f64> {
        self.epochs
            .iter()
            .scan(f64::NEG_INFINITY, |best, r| {
                *best = best.max(r.val_auc);
                Some(*best)
            })
            .collect()
    }
}

/// Result of one run: the report, the classifier at its best epoch, and the
/// final model.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub report: RunReport,
    pub best_classifier: Classifier,
    pub model: PlumeModel,
}

impl FitOutcome {
    /// An inference checkpoint (classifier only) of the best epoch.
    pub fn best_checkpoint(&self, config: &TrainConfig, normal_classes: &[i32]) -> Checkpoint {
        Checkpoint {
            meta: CheckpointMeta {
                config: config.clone(),
                normal_classes: normal_classes.to_vec(),
                run_id: self.report.run_id,
                epoch: self.report.best_epoch,
                val_auc: Some(self.report.best_auc),
            },
            classifier: self.best_classifier.clone(),
            perturbator: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSummary {
    pub loss: LossBreakdown,
    pub lr: f64,
}

/// Mutable state of one run between epochs.
pub struct TrainState {
    pub model: PlumeModel,
    pub optimizer: OptimizerState,
    pub iteration: u64,
    shuffle_rng: rand_chacha::ChaCha8Rng,
    noise_rng: rand_chacha::ChaCha8Rng,
}

impl TrainState {
    /// Builds a fresh model from the `Init` stream of `seed`.
    pub fn new(config: &TrainConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init_rng = stream(seed, Stream::Init);
        let mut model = PlumeModel::init(
            config.classifier_shape(),
            config.perturbation(),
            config.loss_weights(),
            config.guidance,
            &mut init_rng,
        )?;
        let optimizer = OptimizerState::new(&model.parameters_mut());
        Ok(Self {
            model,
            optimizer,
            iteration: 0,
            shuffle_rng: stream(seed, Stream::Shuffle),
            noise_rng: stream(seed, Stream::Noise),
        })
    }

    /// One pass over `train` (normal rows only).
    pub fn train_epoch(&mut self, train: &Matrix, config: &TrainConfig) -> Result<EpochSummary> {
        if train.is_empty() {
            return Err(PlumeError::NoData("training set is empty".into()));
        }
        if train.cols() != self.model.dim() {
            return Err(PlumeError::Dimension {
                op: "train_epoch",
                left: train.shape(),
                right: (train.rows(), self.model.dim()),
            });
        }
        let batches = epoch_indices(train.rows(), config.batch_size, Some(&mut self.shuffle_rng))?;
        let clr = config.clr(batches.len());
        let adamw = config.adamw();
        let first_lr = clr_lr_at(self.iteration, &clr);
        let mut losses = Vec::with_capacity(batches.len());
        for idx in &batches {
            let batch = train.select_rows(idx);
            let noise = self.model.draw_noise(batch.rows(), &mut self.noise_rng);
            let state = self.model.forward_backward(&batch, &noise)?;
            self.model.commit_stats(&state);
            let lr = clr_lr_at(self.iteration, &clr);
            adamw_step(&mut self.model.parameters_mut(), &mut self.optimizer, lr, &adamw);
            self.iteration += 1;
            losses.push(state.loss);
        }
        Ok(EpochSummary {
            loss: LossBreakdown::mean(&losses),
            lr: first_lr,
        })
    }
}

/// Classifier outputs `ŷ` (high = normal) for every row, in eval mode.
pub fn score_rows(classifier: &Classifier, x: &Matrix) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(x.rows());
    let mut start = 0;
    while start < x.rows() {
        let end = (start + SCORE_CHUNK).min(x.rows());
        out.extend(classifier.score_batch(&x.slice_rows(start..end))?);
        start = end;
    }
    Ok(out)
}

/// Validation AUC with normal rows as the positive class.
pub fn evaluate_auc(classifier: &Classifier, x: &Matrix, is_normal: &[bool]) -> Result<f64> {
    roc_auc_from(&score_rows(classifier, x)?, is_normal)
}

fn check_val(split: &OneClassSplit) -> Result<()> {
    let normals = split.val_is_normal.iter().filter(|&&n| n).count();
    let anomalies = split.val_is_normal.len() - normals;
    if normals == 0 || anomalies == 0 {
        return Err(PlumeError::AucUndefined { normals, anomalies });
    }
    Ok(())
}

/// Trains run `run_id` (seed `config.seed + run_id`) and keeps the classifier
/// of the epoch with the highest validation AUC. `on_epoch` sees every
/// record as soon as it is produced.
pub fn fit_with<F>(split: &OneClassSplit, config: &TrainConfig, run_id: usize, mut on_epoch: F) -> Result<FitOutcome>
where
    F: FnMut(&EpochRecord) -> Result<()>,
{
    if split.dim() != config.dim {
        return Err(PlumeError::Config(format!(
            "config dim {} does not match feature dim {}",
            config.dim,
            split.dim()
        )));
    }
    check_val(split)?;
    let seed = config.seed.wrapping_add(run_id as u64);
    let mut state = TrainState::new(config, seed)?;
    let mut report = RunReport {
        run_id,
        seed,
        epochs: Vec::with_capacity(config.epochs),
        best_auc: f64::NEG_INFINITY,
        best_epoch: 0,
    };
    let mut best_classifier = state.model.classifier.clone();
    for epoch in 1..=config.epochs {
        let summary = state.train_epoch(&split.train, config)?;
        let val_auc = evaluate_auc(&state.model.classifier, &split.val, &split.val_is_normal)?;
        let l = summary.loss;
        let record = EpochRecord {
            run_id,
            epoch,
            lr: summary.lr,
            loss_total: l.total,
            loss_ce: l.ce,
            loss_n: l.noise,
            loss_kl: l.kl,
            loss_c: l.contrastive,
            val_auc,
        };
        on_epoch(&record)?;
        if val_auc > report.best_auc {
            report.best_auc = val_auc;
            report.best_epoch = epoch;
            best_classifier = state.model.classifier.clone();
        }
        report.epochs.push(record);
    }
    if report.epochs.is_empty() {
        return Err(PlumeError::Config("epochs must be at least 1".into()));
    }
    Ok(FitOutcome {
        report,
        best_classifier,
        model: state.model,
    })
}

pub fn fit(split: &OneClassSplit, config: &TrainConfig, run_id: usize) -> Result<FitOutcome> {
    fit_with(split, config, run_id, |_| Ok(()))
}

/// One configuration of a suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteCell {
    pub label: String,
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub label: String,
    pub strategy: StrategyKind,
    pub guidance: Guidance,
    pub lambda: f64,
    pub aucs: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

impl SuiteRow {
    pub fn from_aucs(cell: &SuiteCell, aucs: Vec<f64>) -> Result<Self> {
        let (mean, std) = aggregate(&aucs)?;
        Ok(Self {
            label: cell.label.clone(),
            strategy: cell.config.strategy,
            guidance: cell.config.guidance,
            lambda: cell.config.lambda,
            aucs,
            mean,
            std,
        })
    }
}

/// Runs `config.runs` seeds of every cell and aggregates the best AUCs.
/// `on_run` sees each finished run with its cell.
pub fn run_suite<F>(cells: &[SuiteCell], split: &OneClassSplit, mut on_run: F) -> Result<Vec<SuiteRow>>
where
    F: FnMut(&SuiteCell, &FitOutcome) -> Result<()>,
{
    cells
        .iter()
        .map(|cell| {
            let mut aucs = Vec::with_capacity(cell.config.runs);
            for run in 0..cell.config.runs {
                let outcome = fit(split, &cell.config, run)?;
                on_run(cell, &outcome)?;
                aucs.push(outcome.report.best_auc);
            }
            SuiteRow::from_aucs(cell, aucs)
        })
        .collect()
}

/// One cell per λ.
pub fn lambda_grid(base: &TrainConfig, lambdas: &[f64]) -> Vec<SuiteCell> {
    lambdas
        .iter()
        .map(|&lambda| SuiteCell {
            label: format!("lambda={lambda}"),
            config: TrainConfig { lambda, ..base.clone() },
        })
        .collect()
}

/// The strategy × guidance grid, strategies outermost.
pub fn ablation_grid(base: &TrainConfig, strategies: &[StrategyKind], guidances: &[Guidance]) -> Vec<SuiteCell> {
    strategies
        .iter()
        .flat_map(|&strategy| {
            guidances.iter().map(move |&guidance| SuiteCell {
                label: format!("{} / {}", strategy.name(), guidance.table_label()),
                config: TrainConfig {
                    strategy,
                    guidance,
                    ..base.clone()
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_blobs, one_class_split, FeatureDataset, SynthSpec};

    fn small_config() -> TrainConfig {
        TrainConfig {
            dim: 6,
            hidden1: 16,
            hidden2: 8,
            batch_size: 8,
            epochs: 3,
            runs: 2,
            ..Default::default()
        }
    }

    fn blobs(dim: usize, n: usize) -> OneClassSplit {
        let spec = SynthSpec { dim, n_normal: n, n_anomaly: 0, ..Default::default() };
        let train = synth_blobs(&spec).unwrap();
        let val = synth_blobs(&SynthSpec { n_normal: 40, n_anomaly: 40, stream: 1, ..spec }).unwrap();
        one_class_split(&FeatureDataset::from_files(&train, &val).unwrap(), &[0]).unwrap()
    }

    #[test]
    fn fit_is_deterministic_and_best_is_max() {
        let split = blobs(6, 64);
        let cfg = small_config();
        let a = fit(&split, &cfg, 0).unwrap();
        let b = fit(&split, &cfg, 0).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.best_classifier, b.best_classifier);
        let max = a.report.epochs.iter().map(|e| e.val_auc).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.report.best_auc, max);
        let curve = a.report.best_auc_curve();
        assert!(curve.windows(2).all(|w| w[0] <= w[1]));
        let again = evaluate_auc(&a.best_classifier, &split.val, &split.val_is_normal).unwrap();
        assert_eq!(again, a.report.best_auc);
    }

    #[test]
    fn run_ids_use_different_seeds() {
        let split = blobs(6, 64);
        let cfg = small_config();
        let a = fit(&split, &cfg, 0).unwrap();
        let b = fit(&split, &cfg, 1).unwrap();
        assert_eq!(b.report.seed, cfg.seed + 1);
        assert_ne!(a.report.epochs[0].loss_total, b.report.epochs[0].loss_total);
    }

    #[test]
    fn single_class_val_is_rejected() {
        let mut split = blobs(6, 64);
        split.val_is_normal.iter_mut().for_each(|n| *n = true);
        let err = fit(&split, &small_config(), 0).unwrap_err();
        assert!(matches!(err, PlumeError::AucUndefined { anomalies: 0, .. }));
    }

    #[test]
    fn dim_mismatch_is_rejected() {
        let split = blobs(6, 64);
        let cfg = TrainConfig { dim: 7, ..small_config() };
        assert!(matches!(fit(&split, &cfg, 0), Err(PlumeError::Config(_))));
    }

    #[test]
    fn empty_training_set() {
        let cfg = small_config();
        let mut state = TrainState::new(&cfg, 0).unwrap();
        let err = state.train_epoch(&Matrix::zeros(0, 6), &cfg).unwrap_err();
        assert!(matches!(err, PlumeError::NoData(_)));
    }

    #[test]
    fn gaussian_has_zero_noise_terms() {
        let split = blobs(6, 64);
        let cfg = TrainConfig { strategy: StrategyKind::Gaussian, ..small_config() };
        let out = fit(&split, &cfg, 0).unwrap();
        assert!(out.model.perturbator.is_none());
        for e in &out.report.epochs {
            assert_eq!(e.loss_n, 0.0);
            assert_eq!(e.loss_kl, 0.0);
        }
    }

    #[test]
    fn zero_lr_freezes_parameters() {
        let split = blobs(6, 64);
        let cfg = TrainConfig { base_lr: 0.0, max_lr: 0.0, ..small_config() };
        let mut state = TrainState::new(&cfg, 0).unwrap();
        let before: Vec<_> = state.model.parameters().iter().map(|p| p.value.clone()).collect();
        state.train_epoch(&split.train, &cfg).unwrap();
        state.train_epoch(&split.train, &cfg).unwrap();
        let after: Vec<_> = state.model.parameters().iter().map(|p| p.value.clone()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn suite_rows_and_grids() {
        let split = blobs(6, 32);
        let cfg = TrainConfig { epochs: 1, runs: 1, ..small_config() };
        let cells = lambda_grid(&cfg, &[5.0, 10.0, 20.0]);
        let mut runs = 0;
        let rows = run_suite(&cells, &split, |_, _| {
            runs += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(runs, 3);
        assert!(rows.iter().all(|r| r.std == 0.0));
        assert_eq!(rows[1].lambda, 10.0);

        let grid = ablation_grid(&cfg, &StrategyKind::ALL, &[Guidance::None, Guidance::Mean, Guidance::Full]);
        assert_eq!(grid.len(), 15);
        assert_eq!(grid[0].config.strategy, StrategyKind::Gaussian);
        assert_eq!(grid[14].config.guidance, Guidance::Full);
    }

    #[test]
    fn suite_row_statistics() {
        let cell = SuiteCell { label: "x".into(), config: TrainConfig::default() };
        let row = SuiteRow::from_aucs(&cell, vec![0.8, 0.9]).unwrap();
        assert!((row.mean - 0.85).abs() < 1e-12);
        assert!((row.std - 0.0707).abs() < 1e-4);
    }
}
