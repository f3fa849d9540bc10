//! Layer primitives with explicit forward and backward passes.
//!
//! Every backward function takes the upstream gradient and whatever the
//! forward pass cached, and returns gradients without touching global state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{PlumeError, Result};

pub const LEAKY_SLOPE: f64 = 0.01;
pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// A learnable tensor and its gradient slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub value: Matrix,
    pub grad: Matrix,
}

impl Parameter {
    pub fn new(value: Matrix) -> Self {
        let (r, c) = value.shape();
        Self {
            value,
            grad: Matrix::zeros(r, c),
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Dense layer `out = input · weight (+ bias)`, weight stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Parameter,
    pub bias: Option<Parameter>,
}

pub struct LinearGrads {
    pub input: Matrix,
    pub weight: Matrix,
    pub bias: Option<Vec<f64>>,
}

impl Linear {
    pub fn zeros(fan_in: usize, fan_out: usize, bias: bool) -> Self {
        Self {
            weight: Parameter::new(Matrix::zeros(fan_in, fan_out)),
            bias: bias.then(|| Parameter::new(Matrix::zeros(1, fan_out))),
        }
    }

    /// Uniform in ±sqrt(1/fan_in) for weight and bias.
    pub fn init_uniform<R: Rng + ?Sized>(
        fan_in: usize,
        fan_out: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let bound = (1.0 / fan_in as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
        };
        let w = draw(fan_in * fan_out);
        let b = bias.then(|| draw(fan_out));
        Self {
            weight: Parameter::new(Matrix::new(fan_in, fan_out, w).expect("shape")),
            bias: b.map(|b| Parameter::new(Matrix::row_vector(&b))),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.as_ref().map_or(0, Parameter::len)
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        linear_forward(
            input,
            &self.weight.value,
            self.bias.as_ref().map(|b| b.value.as_slice()),
        )
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    pub fn backward(&mut self, grad_out: &Matrix, cached_input: &Matrix) -> Result<Matrix> {
        if grad_out.rows() != cached_input.rows() || grad_out.cols() != self.fan_out() {
            return Err(PlumeError::Dimension {
                op: "linear_backward",
                left: grad_out.shape(),
                right: (cached_input.rows(), self.fan_out()),
            });
        }
        cached_input.t_matmul_acc(grad_out, &mut self.weight.grad)?;
        if let Some(b) = self.bias.as_mut() {
            for (acc, v) in b.grad.as_mut_slice().iter_mut().zip(grad_out.column_sums()) {
                *acc += v;
            }
        }
        grad_out.matmul_t(&self.weight.value)
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        std::iter::once(&mut self.weight).chain(self.bias.as_mut())
    }

    pub fn parameters(&self) -> impl Iterator<Item = &Parameter> {
        std::iter::once(&self.weight).chain(self.bias.as_ref())
    }
}

pub fn linear_forward(input: &Matrix, weight: &Matrix, bias: Option<&[f64]>) -> Result<Matrix> {
    let mut out = input.matmul(weight)?;
    if let Some(bias) = bias {
        if bias.len() != weight.cols() {
            return Err(PlumeError::Dimension {
                op: "linear_forward bias",
                left: weight.shape(),
                right: (1, bias.len()),
            });
        }
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(bias) {
                *o += b;
            }
        }
    }
    Ok(out)
}

pub fn linear_backward(
    grad_out: &Matrix,
    cached_input: &Matrix,
    weight: &Matrix,
) -> Result<LinearGrads> {
    if grad_out.rows() != cached_input.rows() || grad_out.cols() != weight.cols() {
        return Err(PlumeError::Dimension {
            op: "linear_backward",
            left: grad_out.shape(),
            right: (cached_input.rows(), weight.cols()),
        });
    }
    Ok(LinearGrads {
        input: grad_out.matmul_t(weight)?,
        weight: cached_input.t_matmul(grad_out)?,
        bias: Some(grad_out.column_sums()),
    })
}

pub fn leaky_relu(input: &Matrix, slope: f64) -> Matrix {
    input.map(|x| if x > 0.0 { x } else { slope * x })
}

/// Kink at zero takes the `slope` branch.
pub fn leaky_relu_backward(grad_out: &Matrix, cached_input: &Matrix, slope: f64) -> Result<Matrix> {
    grad_out.zip_map(cached_input, |g, x| if x > 0.0 { g } else { slope * g })
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// Non-affine batch normalization with running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
    /// Number of train-mode batches folded into the running statistics.
    pub tracked_batches: u64,
}

/// What the train-mode forward pass needs to keep for backward.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub normalized: Matrix,
    pub inv_std: Vec<f64>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

impl BatchNormState {
    pub fn new(dim: usize) -> Self {
        Self {
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum: BN_MOMENTUM,
            epsilon: BN_EPSILON,
            tracked_batches: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.running_mean.len()
    }

    pub fn is_initialized(&self) -> bool {
        self.tracked_batches > 0
    }

    /// Normalizes by batch statistics (biased variance). Does not touch the
    /// running statistics; call [`BatchNormState::update`] with the cache.
    pub fn forward_train(&self, input: &Matrix) -> Result<BatchNormCache> {
        self.check_dim(input)?;
        batch_norm_train(input, self.epsilon)
    }

    pub fn update(&mut self, cache: &BatchNormCache) {
        let m = self.momentum;
        for (r, b) in self.running_mean.iter_mut().zip(&cache.batch_mean) {
            *r = (1.0 - m) * *r + m * b;
        }
        for (r, b) in self.running_var.iter_mut().zip(&cache.batch_var) {
            *r = (1.0 - m) * *r + m * b;
        }
        self.tracked_batches += 1;
    }

    /// Train-mode forward that also folds the batch statistics in.
    pub fn forward_train_update(&mut self, input: &Matrix) -> Result<BatchNormCache> {
        let cache = self.forward_train(input)?;
        self.update(&cache);
        Ok(cache)
    }

    pub fn forward_eval(&self, input: &Matrix) -> Result<Matrix> {
        self.check_dim(input)?;
        let inv_std: Vec<f64> = self
            .running_var
            .iter()
            .map(|v| 1.0 / (v + self.epsilon).sqrt())
            .collect();
        let mut out = input.clone();
        for r in 0..out.rows() {
            for ((o, m), s) in out
                .row_mut(r)
                .iter_mut()
                .zip(&self.running_mean)
                .zip(&inv_std)
            {
                *o = (*o - m) * s;
            }
        }
        Ok(out)
    }

    pub fn forward(&mut self, input: &Matrix, mode: Mode) -> Result<Matrix> {
        match mode {
            Mode::Train => Ok(self.forward_train_update(input)?.normalized),
            Mode::Eval => self.forward_eval(input),
        }
    }

    fn check_dim(&self, input: &Matrix) -> Result<()> {
        if input.cols() != self.dim() {
            return Err(PlumeError::Dimension {
                op: "batch_norm",
                left: input.shape(),
                right: (1, self.dim()),
            });
        }
        Ok(())
    }
}

pub fn batch_norm_train(input: &Matrix, epsilon: f64) -> Result<BatchNormCache> {
    let n = input.rows();
    if n < 2 {
        return Err(PlumeError::BatchTooSmall {
            op: "batch_norm (train)",
            required: 2,
            actual: n,
        });
    }
    let mean = input.column_means();
    let mut var = vec![0.0; input.cols()];
    for row in input.row_iter() {
        for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
            let d = x - m;
            *v += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v /= n as f64);
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + epsilon).sqrt()).collect();
    let mut normalized = input.clone();
    for r in 0..n {
        for ((o, m), s) in normalized.row_mut(r).iter_mut().zip(&mean).zip(&inv_std) {
            *o = (*o - m) * s;
        }
    }
    Ok(BatchNormCache {
        normalized,
        inv_std,
        batch_mean: mean,
        batch_var: var,
    })
}

/// `dx = inv_std · (dy − mean(dy) − ŷ ⊙ mean(dy ⊙ ŷ))`, column-wise.
pub fn batch_norm_backward(grad_out: &Matrix, cache: &BatchNormCache) -> Result<Matrix> {
    let y = &cache.normalized;
    if grad_out.shape() != y.shape() {
        return Err(PlumeError::Dimension {
            op: "batch_norm_backward",
            left: grad_out.shape(),
            right: y.shape(),
        });
    }
    let n = y.rows() as f64;
    let d = y.cols();
    let mut mean_g = vec![0.0; d];
    let mut mean_gy = vec![0.0; d];
    for r in 0..y.rows() {
        for (c, (g, yv)) in grad_out.row(r).iter().zip(y.row(r)).enumerate() {
            mean_g[c] += g;
            mean_gy[c] += g * yv;
        }
    }
    mean_g.iter_mut().for_each(|v| *v /= n);
    mean_gy.iter_mut().for_each(|v| *v /= n);
    let mut out = Matrix::zeros(y.rows(), d);
    for r in 0..y.rows() {
        let (g_row, y_row) = (grad_out.row(r), y.row(r));
        for (c, o) in out.row_mut(r).iter_mut().enumerate() {
            *o = cache.inv_std[c] * (g_row[c] - mean_g[c] - y_row[c] * mean_gy[c]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradcheck::{central_difference, relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    fn weighted_sum(m: &Matrix, w: &Matrix) -> f64 {
        m.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn linear_forward_examples() {
        let x = Matrix::from_rows(&[[1.0, 2.0]]);
        let eye = Matrix::identity(2);
        assert_eq!(linear_forward(&x, &eye, None).unwrap(), x);

        let zero = Matrix::zeros(2, 2);
        let out = linear_forward(&x, &zero, Some(&[3.0, 4.0])).unwrap();
        assert_eq!(out.as_slice(), &[3.0, 4.0]);

        let ones = Matrix::from_rows(&[[1.0, 1.0]]);
        let w = Matrix::from_rows(&[[2.0, 1.0], [1.0, 3.0]]);
        let out = linear_forward(&ones, &w, Some(&[0.5, -0.5])).unwrap();
        assert_eq!(out.as_slice(), &[3.5, 3.5]);
    }

    #[test]
    fn linear_shape_mismatch() {
        let x = Matrix::zeros(1, 3);
        assert!(matches!(
            linear_forward(&x, &Matrix::zeros(2, 2), None),
            Err(PlumeError::Dimension { .. })
        ));
        assert!(linear_backward(&Matrix::zeros(1, 3), &x, &Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn linear_backward_scalar_chain_rule() {
        let g = linear_backward(
            &Matrix::from_rows(&[[1.0]]),
            &Matrix::from_rows(&[[2.0]]),
            &Matrix::from_rows(&[[3.0]]),
        )
        .unwrap();
        assert_eq!(g.input.as_slice(), &[3.0]);
        assert_eq!(g.weight.as_slice(), &[2.0]);
        assert_eq!(g.bias.unwrap(), vec![1.0]);

        let g = linear_backward(&Matrix::zeros(3, 2), &Matrix::filled(3, 4, 1.5), &Matrix::filled(4, 2, 0.7)).unwrap();
        assert!(g.input.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.weight.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.bias.unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random(4, 5, &mut rng);
        let w = random(5, 3, &mut rng);
        let b: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let probe = random(4, 3, &mut rng);
        let loss = |x: &Matrix, w: &Matrix, b: &[f64]| {
            weighted_sum(&linear_forward(x, w, Some(b)).unwrap(), &probe)
        };
        let g = linear_backward(&probe, &x, &w).unwrap();
        let h = 1e-5;
        for i in 0..w.len() {
            let num = central_difference(w.as_slice(), i, h, |p| {
                loss(&x, &Matrix::new(5, 3, p.to_vec()).unwrap(), &b)
            });
            assert!(relative_error(g.weight.as_slice()[i], num, 1e-6) < 1e-6);
        }
        for i in 0..x.len() {
            let num = central_difference(x.as_slice(), i, h, |p| {
                loss(&Matrix::new(4, 5, p.to_vec()).unwrap(), &w, &b)
            });
            assert!(relative_error(g.input.as_slice()[i], num, 1e-6) < 1e-6);
        }
        let gb = g.bias.unwrap();
        for i in 0..3 {
            let num = central_difference(&b, i, h, |p| loss(&x, &w, p));
            assert!(relative_error(gb[i], num, 1e-6) < 1e-6);
        }
    }

    #[test]
    fn leaky_relu_examples_and_gradient() {
        let x = Matrix::row_vector(&[-1.0, 2.0]);
        assert_eq!(leaky_relu(&x, 0.01).as_slice(), &[-0.01, 2.0]);
        let pos = Matrix::row_vector(&[0.5, 3.0, 7.0]);
        assert_eq!(leaky_relu(&pos, 0.01), pos);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(3, 6, &mut rng);
        let probe = random(3, 6, &mut rng);
        let g = leaky_relu_backward(&probe, &x, LEAKY_SLOPE).unwrap();
        for i in 0..x.len() {
            if x.as_slice()[i].abs() < 1e-3 {
                continue;
            }
            let num = central_difference(x.as_slice(), i, 1e-5, |p| {
                weighted_sum(&leaky_relu(&Matrix::new(3, 6, p.to_vec()).unwrap(), LEAKY_SLOPE), &probe)
            });
            assert!(relative_error(g.as_slice()[i], num, 1e-6) < 1e-6);
        }
        // zero input takes the slope branch
        let g0 = leaky_relu_backward(&Matrix::row_vector(&[1.0]), &Matrix::row_vector(&[0.0]), 0.01).unwrap();
        assert_eq!(g0.as_slice(), &[0.01]);
    }

    #[test]
    fn batch_norm_hand_example() {
        let mut bn = BatchNormState::new(1);
        let out = bn.forward(&Matrix::from_rows(&[[1.0], [3.0]]), Mode::Train).unwrap();
        // var = 1, so the output is (x - 2) / sqrt(1 + 1e-5)
        let s = 1.0 / (1.0 + BN_EPSILON).sqrt();
        assert!((out.get(0, 0) + s).abs() < 1e-15);
        assert!((out.get(1, 0) - s).abs() < 1e-15);
        assert!((out.get(0, 0) + 1.0).abs() < 1e-5);
        assert!((bn.running_mean[0] - 0.2).abs() < 1e-15);
        assert!((bn.running_var[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn batch_norm_constant_column_is_zero() {
        let cache = batch_norm_train(&Matrix::filled(4, 2, 3.25), BN_EPSILON).unwrap();
        assert!(cache.normalized.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_norm_train_needs_two_rows() {
        let mut bn = BatchNormState::new(3);
        let err = bn.forward(&Matrix::zeros(1, 3), Mode::Train).unwrap_err();
        assert!(matches!(err, PlumeError::BatchTooSmall { actual: 1, .. }));
        // eval with a single row is fine and leaves the state untouched
        let before = bn.clone();
        bn.forward(&Matrix::zeros(1, 3), Mode::Eval).unwrap();
        assert_eq!(bn, before);
    }

    #[test]
    fn batch_norm_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random(5, 4, &mut rng);
        let probe = random(5, 4, &mut rng);
        let cache = batch_norm_train(&x, BN_EPSILON).unwrap();
        let g = batch_norm_backward(&probe, &cache).unwrap();
        for i in 0..x.len() {
            let num = central_difference(x.as_slice(), i, 1e-5, |p| {
                let c = batch_norm_train(&Matrix::new(5, 4, p.to_vec()).unwrap(), BN_EPSILON).unwrap();
                weighted_sum(&c.normalized, &probe)
            });
            assert!(relative_error(g.as_slice()[i], num, 1e-6) < 1e-5, "entry {i}");
        }
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(500.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(1);
        let la = Linear::init_uniform(16, 4, true, &mut a);
        let lb = Linear::init_uniform(16, 4, true, &mut b);
        assert_eq!(la, lb);
        assert!(la.weight.value.as_slice().iter().all(|v| v.abs() <= 0.25));
        assert_eq!(la.param_count(), 16 * 4 + 4);
    }
}
