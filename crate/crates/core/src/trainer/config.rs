use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierShape;
use crate::error::{PlumeError, Result};
use crate::losses::{Guidance, LossWeights};
use crate::perturbator::{PerturbationStrategy, StrategyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClrPolicy {
    Triangular,
    /// Triangular with the amplitude halved every cycle.
    Triangular2,
}

impl std::str::FromStr for ClrPolicy {
    type Err = PlumeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "triangular" => Ok(ClrPolicy::Triangular),
            "triangular2" => Ok(ClrPolicy::Triangular2),
            other => Err(PlumeError::Config(format!("unknown CLR policy {other:?}"))),
        }
    }
}

/// Every hyperparameter of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dim: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lambda: f64,
    pub nu: f64,
    pub gamma: f64,
    pub tau: f64,
    pub strategy: StrategyKind,
    pub gaussian_sigma: f64,
    pub guidance: Guidance,
    pub seed: u64,
    pub runs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub base_lr: f64,
    pub max_lr: f64,
    /// Half-cycle of the learning-rate wave, in epochs.
    pub step_size_epochs: f64,
    pub clr_policy: ClrPolicy,
    /// Recorded for reproducibility; all kernels are single-threaded.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 3072,
            hidden1: 1024,
            hidden2: 512,
            batch_size: 32,
            epochs: 100,
            lambda: 5.0,
            nu: 1.0,
            gamma: 1.0,
            tau: 0.5,
            strategy: StrategyKind::LinearMap,
            gaussian_sigma: 1.0,
            guidance: Guidance::Full,
            seed: 0,
            runs: 5,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 0.01,
            base_lr: 1e-4,
            max_lr: 1e-3,
            step_size_epochs: 2.0,
            clr_policy: ClrPolicy::Triangular,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PlumeError::Config(msg));
        if self.dim == 0 || self.hidden1 == 0 || self.hidden2 == 0 {
            return bad("dim, hidden1 and hidden2 must be positive".into());
        }
        if self.batch_size < 2 {
            return bad(format!("batch_size must be >= 2, got {}", self.batch_size));
        }
        for (name, v) in [("lambda", self.lambda), ("nu", self.nu), ("gamma", self.gamma), ("tau", self.tau)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be a finite value >= 0, got {v}"));
            }
        }
        if self.tau == 0.0 && self.guidance != Guidance::None {
            return bad("tau must be > 0 when contrastive guidance is enabled".into());
        }
        if !(self.base_lr >= 0.0 && self.base_lr <= self.max_lr) {
            return bad(format!("need 0 <= base_lr <= max_lr, got {} and {}", self.base_lr, self.max_lr));
        }
        if !(self.step_size_epochs > 0.0) {
            return bad("step_size_epochs must be > 0".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)".into());
        }
        if !(self.adam_eps > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("adam_eps must be > 0 and weight_decay >= 0".into());
        }
        if self.runs == 0 {
            return bad("runs must be >= 1".into());
        }
        if self.threads != 1 {
            return bad(format!("only single-threaded kernels are built, threads = {}", self.threads));
        }
        self.perturbation().validate()
    }

    pub fn perturbation(&self) -> PerturbationStrategy {
        PerturbationStrategy {
            kind: self.strategy,
            gaussian_sigma: self.gaussian_sigma,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda: self.lambda,
            nu: self.nu,
            gamma: self.gamma,
            tau: self.tau,
        }
    }

    pub fn classifier_shape(&self) -> ClassifierShape {
        ClassifierShape {
            dim: self.dim,
            hidden1: self.hidden1,
            hidden2: self.hidden2,
        }
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn clr(&self, batches_per_epoch: usize) -> ClrConfig {
        ClrConfig {
            base_lr: self.base_lr,
            max_lr: self.max_lr,
            step_size_iters: (self.step_size_epochs * batches_per_epoch as f64).max(1.0),
            policy: self.clr_policy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClrConfig {
    pub base_lr: f64,
    pub max_lr: f64,
    /// Half-period of the wave, in iterations.
    pub step_size_iters: f64,
    pub policy: ClrPolicy,
}
