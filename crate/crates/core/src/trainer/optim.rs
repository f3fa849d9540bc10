//! AdamW with decoupled weight decay, and the cyclical learning-rate schedule.

use super::config::{AdamWConfig, ClrConfig, ClrPolicy};
use crate::tensor::Parameter;

/// First/second moment accumulators, one pair per parameter tensor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerState {
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &[&mut Parameter]) -> Self {
        Self {
            first: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            second: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            step: 0,
        }
    }
}

/// One AdamW update using the gradients currently stored in `params`.
///
/// ```text
/// p ← p − lr·wd·p
/// m ← β₁m + (1−β₁)g,  v ← β₂v + (1−β₂)g²
/// p ← p − lr·m̂ / (√v̂ + ε)
/// ```
pub fn adamw_step(params: &mut [&mut Parameter], state: &mut OptimizerState, lr: f64, cfg: &AdamWConfig) {
    assert_eq!(params.len(), state.first.len(), "optimizer state does not match parameters");
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let decay = 1.0 - lr * cfg.weight_decay;
    for (k, p) in params.iter_mut().enumerate() {
        let Parameter { value, grad } = &mut **p;
        let moments = state.first[k].iter_mut().zip(state.second[k].iter_mut());
        for ((w, &g), (m, v)) in value.as_mut_slice().iter_mut().zip(grad.as_slice()).zip(moments) {
            *w *= decay;
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

/// Learning rate at a global iteration (0-based).
pub fn clr_lr_at(iteration: u64, cfg: &ClrConfig) -> f64 {
    let it = iteration as f64;
    let step = cfg.step_size_iters;
    let cycle = (1.0 + it / (2.0 * step)).floor();
    let x = (it / step - 2.0 * cycle + 1.0).abs();
    let amplitude = (cfg.max_lr - cfg.base_lr) * (1.0 - x).max(0.0);
    match cfg.policy {
        ClrPolicy::Triangular => cfg.base_lr + amplitude,
        ClrPolicy::Triangular2 => cfg.base_lr + amplitude / 2f64.powf(cycle - 1.0),
    }
}
