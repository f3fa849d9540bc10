//! Finite-difference gradient checking.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{PlumeError, Result};

/// A flat view of one parameter tensor and its analytic gradient.
#[derive(Debug, Clone)]
pub struct NamedTensor {
    pub name: String,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    pub tolerance: f64,
    /// Denominator floor for the relative error.
    pub abs_floor: f64,
    /// Check at most this many entries per tensor (chosen with `seed`).
    pub max_entries: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            abs_floor: 1e-6,
            max_entries: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors
            .iter()
            .map(|t| t.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() <= self.tolerance
    }

    pub fn worst(&self) -> Option<&TensorCheck> {
        self.tensors
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

pub fn relative_error(analytic: f64, numeric: f64, abs_floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(abs_floor)
}

/// `(f(p + h·e_i) − f(p − h·e_i)) / 2h`
pub fn central_difference(params: &[f64], index: usize, h: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut p = params.to_vec();
    p[index] = params[index] + h;
    let plus = f(&p);
    p[index] = params[index] - h;
    let minus = f(&p);
    (plus - minus) / (2.0 * h)
}

/// Compares analytic gradients against central differences of `loss`.
///
/// `loss` receives the full set of tensor values (same order as `tensors`) and
/// must be deterministic; a closure that returns different values for the same
/// input is rejected with [`PlumeError::CheckInvalid`].
pub fn grad_check<F>(mut loss: F, tensors: &[NamedTensor], opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: FnMut(&[Vec<f64>]) -> f64,
{
    for t in tensors {
        if t.values.len() != t.grad.len() {
            return Err(PlumeError::CheckInvalid(format!(
                "tensor {} has {} values but {} gradient entries",
                t.name,
                t.values.len(),
                t.grad.len()
            )));
        }
    }
    let mut work: Vec<Vec<f64>> = tensors.iter().map(|t| t.values.clone()).collect();
    let base = loss(&work);
    let again = loss(&work);
    if !base.is_finite() {
        return Err(PlumeError::CheckInvalid(format!("loss is not finite ({base})")));
    }
    if base.to_bits() != again.to_bits() {
        return Err(PlumeError::CheckInvalid(format!(
            "loss is not deterministic: {base} then {again}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let h = opts.step;
    let mut reports = Vec::with_capacity(tensors.len());
    for (ti, t) in tensors.iter().enumerate() {
        let n = t.values.len();
        let indices: Vec<usize> = match opts.max_entries {
            Some(k) if k < n => {
                let mut idx = sample(&mut rng, n, k).into_vec();
                idx.sort_unstable();
                idx
            }
            _ => (0..n).collect(),
        };
        let mut check = TensorCheck {
            name: t.name.clone(),
            checked: indices.len(),
            max_rel_error: 0.0,
            worst_index: 0,
            worst_analytic: 0.0,
            worst_numeric: 0.0,
        };
        for i in indices {
            let orig = work[ti][i];
            work[ti][i] = orig + h;
            let plus = loss(&work);
            work[ti][i] = orig - h;
            let minus = loss(&work);
            work[ti][i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(t.grad[i], numeric, opts.abs_floor);
            if !err.is_finite() || err > check.max_rel_error {
                check.max_rel_error = if err.is_finite() { err } else { f64::INFINITY };
                check.worst_index = i;
                check.worst_analytic = t.grad[i];
                check.worst_numeric = numeric;
            }
        }
        reports.push(check);
    }
    Ok(GradCheckReport {
        tensors: reports,
        tolerance: opts.tolerance,
    })
}
