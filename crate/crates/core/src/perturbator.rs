//! The VAE perturbator and the pseudo-anomaly generation strategies.
//!
//! The encoder maps a normal feature vector to a per-sample Gaussian
//! `(mu, logvar)`; a latent draw `z = mu + exp(logvar/2)·eps` is decoded into
//! the noise parameters `(alpha, beta)`. The default strategy applies the
//! rank-1 map `x ↦ (I + alpha·betaᵀ)·x` without ever forming the D×D matrix.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PlumeError, Result};
use crate::tensor::{dot, leaky_relu, leaky_relu_backward, Linear, Matrix, Parameter, LEAKY_SLOPE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    #[serde(alias = "LinearMap")]
    LinearMap,
    #[serde(alias = "AddMult")]
    AddMult,
    #[serde(alias = "Add")]
    Add,
    #[serde(alias = "Mult")]
    Mult,
    #[serde(alias = "Gaussian")]
    Gaussian,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Gaussian,
        StrategyKind::AddMult,
        StrategyKind::Add,
        StrategyKind::Mult,
        StrategyKind::LinearMap,
    ];

    pub fn is_adaptive(self) -> bool {
        self != StrategyKind::Gaussian
    }

    /// Width of the decoder output as a multiple of D.
    pub fn decoder_width_factor(self) -> usize {
        match self {
            StrategyKind::LinearMap | StrategyKind::AddMult => 2,
            StrategyKind::Add | StrategyKind::Mult => 1,
            StrategyKind::Gaussian => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::LinearMap => "LinearMap",
            StrategyKind::AddMult => "AddMult",
            StrategyKind::Add => "Add",
            StrategyKind::Mult => "Mult",
            StrategyKind::Gaussian => "Gaussian",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = PlumeError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| PlumeError::Config(format!("unknown perturbation strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationStrategy {
    pub kind: StrategyKind,
    /// Only used by [`StrategyKind::Gaussian`].
    pub gaussian_sigma: f64,
}

impl Default for PerturbationStrategy {
    fn default() -> Self {
        Self {
            kind: StrategyKind::LinearMap,
            gaussian_sigma: 1.0,
        }
    }
}

impl PerturbationStrategy {
    pub fn new(kind: StrategyKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == StrategyKind::Gaussian && !(self.gaussian_sigma > 0.0) {
            return Err(PlumeError::Config(format!(
                "gaussian_sigma must be > 0, got {}",
                self.gaussian_sigma
            )));
        }
        Ok(())
    }
}

/// `x + alpha·(betaᵀx)`, i.e. `(I + alpha·betaᵀ)·x`.
pub fn perturb_linear(x: &[f64], alpha: &[f64], beta: &[f64]) -> Vec<f64> {
    let s = dot(beta, x);
    x.iter().zip(alpha).map(|(xi, ai)| xi + ai * s).collect()
}

/// `alpha ⊙ x + beta`
pub fn perturb_addmult(x: &[f64], alpha: &[f64], beta: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(alpha)
        .zip(beta)
        .map(|((xi, ai), bi)| ai * xi + bi)
        .collect()
}

pub fn perturb_add(x: &[f64], beta: &[f64]) -> Vec<f64> {
    x.iter().zip(beta).map(|(xi, bi)| xi + bi).collect()
}

pub fn perturb_mult(x: &[f64], alpha: &[f64]) -> Vec<f64> {
    x.iter().zip(alpha).map(|(xi, ai)| ai * xi).collect()
}

pub fn perturb_gaussian<R: Rng + ?Sized>(x: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    x.iter()
        .map(|xi| {
            let n: f64 = rng.sample(StandardNormal);
            xi + sigma * n
        })
        .collect()
}

/// `‖alpha − 1‖² + ‖beta‖²`
pub fn noise_constraint_loss(alpha: &[f64], beta: &[f64]) -> f64 {
    let a: f64 = alpha.iter().map(|a| (a - 1.0) * (a - 1.0)).sum();
    let b: f64 = beta.iter().map(|b| b * b).sum();
    a + b
}

pub fn noise_constraint_grad(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        alpha.iter().map(|a| 2.0 * (a - 1.0)).collect(),
        beta.iter().map(|b| 2.0 * b).collect(),
    )
}

/// KL divergence of `N(mu, exp(logvar))` from the standard normal, summed over dimensions.
pub fn kl_divergence(mu: &[f64], logvar: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| lv.exp() + m * m - 1.0 - lv)
        .sum::<f64>()
}

/// Gradients of [`kl_divergence`] with respect to `mu` and `logvar`.
pub fn kl_grad(mu: &[f64], logvar: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        mu.to_vec(),
        logvar.iter().map(|lv| 0.5 * (lv.exp() - 1.0)).collect(),
    )
}

/// One latent draw per row. `eps` is kept so that backward and replay are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub mu: Matrix,
    pub logvar: Matrix,
    pub eps: Matrix,
    pub z: Matrix,
}

pub fn reparameterize(mu: &Matrix, logvar: &Matrix, eps: &Matrix) -> Result<LatentSample> {
    let std = logvar.map(|lv| (0.5 * lv).exp());
    let scaled = std.zip_map(eps, |s, e| s * e)?;
    let z = mu.zip_map(&scaled, |m, s| m + s)?;
    Ok(LatentSample {
        mu: mu.clone(),
        logvar: logvar.clone(),
        eps: eps.clone(),
        z,
    })
}

pub fn draw_standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::new(rows, cols, data).expect("shape")
}

/// Per-row `(alpha, beta)`. Variants without one of the two vectors carry its
/// identity value (alpha = 1 or beta = 0).
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationOutput {
    pub alpha: Matrix,
    pub beta: Matrix,
}

impl PerturbationOutput {
    pub fn identity(rows: usize, dim: usize) -> Self {
        Self {
            alpha: Matrix::filled(rows, dim, 1.0),
            beta: Matrix::zeros(rows, dim),
        }
    }

    /// Mean over rows of the per-sample noise constraint.
    pub fn noise_loss(&self) -> f64 {
        let n = self.alpha.rows();
        (0..n)
            .map(|i| noise_constraint_loss(self.alpha.row(i), self.beta.row(i)))
            .sum::<f64>()
            / n as f64
    }
}

/// Applies an adaptive strategy row by row.
pub fn apply_adaptive(kind: StrategyKind, x: &Matrix, out: &PerturbationOutput) -> Result<Matrix> {
    if x.shape() != out.alpha.shape() || x.shape() != out.beta.shape() {
        return Err(PlumeError::Dimension {
            op: "apply_adaptive",
            left: x.shape(),
            right: out.alpha.shape(),
        });
    }
    let mut result = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        let (xi, a, b) = (x.row(i), out.alpha.row(i), out.beta.row(i));
        let row = match kind {
            StrategyKind::LinearMap => perturb_linear(xi, a, b),
            StrategyKind::AddMult => perturb_addmult(xi, a, b),
            StrategyKind::Add => perturb_add(xi, b),
            StrategyKind::Mult => perturb_mult(xi, a),
            StrategyKind::Gaussian => {
                return Err(PlumeError::Config(
                    "Gaussian strategy has no adaptive parameters".into(),
                ))
            }
        };
        result.row_mut(i).copy_from_slice(&row);
    }
    Ok(result)
}

/// Gradients of the perturbed batch with respect to `(alpha, beta)`.
pub fn apply_adaptive_backward(
    kind: StrategyKind,
    x: &Matrix,
    out: &PerturbationOutput,
    grad_perturbed: &Matrix,
) -> (Matrix, Matrix) {
    let (n, d) = x.shape();
    let mut ga = Matrix::zeros(n, d);
    let mut gb = Matrix::zeros(n, d);
    for i in 0..n {
        let (xi, a, b, g) = (x.row(i), out.alpha.row(i), out.beta.row(i), grad_perturbed.row(i));
        match kind {
            StrategyKind::LinearMap => {
                let s = dot(b, xi);
                let ag = dot(a, g);
                for (o, gv) in ga.row_mut(i).iter_mut().zip(g) {
                    *o = gv * s;
                }
                for (o, xv) in gb.row_mut(i).iter_mut().zip(xi) {
                    *o = ag * xv;
                }
            }
            StrategyKind::AddMult | StrategyKind::Mult => {
                for ((o, gv), xv) in ga.row_mut(i).iter_mut().zip(g).zip(xi) {
                    *o = gv * xv;
                }
                if kind == StrategyKind::AddMult {
                    gb.row_mut(i).copy_from_slice(g);
                }
            }
            StrategyKind::Add => gb.row_mut(i).copy_from_slice(g),
            StrategyKind::Gaussian => {}
        }
    }
    (ga, gb)
}

/// Layer shapes of the perturbator for a given D and strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerturbatorShape {
    pub dim: usize,
    pub kind: StrategyKind,
}

impl PerturbatorShape {
    pub fn param_count(&self) -> usize {
        if !self.kind.is_adaptive() {
            return 0;
        }
        let d = self.dim;
        let square = d * d + d;
        let out = d * self.kind.decoder_width_factor();
        4 * square + d * out + out
    }
}

/// The VAE `g`: encoder `layer1 → {head_mu, head_logvar}`, decoder `dec1 → dec2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbator {
    pub kind: StrategyKind,
    pub layer1: Linear,
    pub head_mu: Linear,
    pub head_logvar: Linear,
    pub dec1: Linear,
    pub dec2: Linear,
}

/// Forward activations kept for backward.
#[derive(Debug, Clone)]
pub struct PerturbatorPass {
    pub input: Matrix,
    pub hidden_pre: Matrix,
    pub hidden: Matrix,
    pub latent: LatentSample,
    pub dec_pre: Matrix,
    pub dec_hidden: Matrix,
    pub output: PerturbationOutput,
    pub perturbed: Matrix,
}

pub const PERTURBATOR_TENSORS: [&str; 10] = [
    "perturbator.layer1.weight",
    "perturbator.layer1.bias",
    "perturbator.head_mu.weight",
    "perturbator.head_mu.bias",
    "perturbator.head_logvar.weight",
    "perturbator.head_logvar.bias",
    "perturbator.dec1.weight",
    "perturbator.dec1.bias",
    "perturbator.dec2.weight",
    "perturbator.dec2.bias",
];

impl Perturbator {
    pub fn init<R: Rng + ?Sized>(dim: usize, kind: StrategyKind, rng: &mut R) -> Result<Self> {
        if !kind.is_adaptive() {
            return Err(PlumeError::Config(
                "the Gaussian strategy has no perturbator network".into(),
            ));
        }
        let out = dim * kind.decoder_width_factor();
        Ok(Self {
            kind,
            layer1: Linear::init_uniform(dim, dim, true, rng),
            head_mu: Linear::init_uniform(dim, dim, true, rng),
            head_logvar: Linear::init_uniform(dim, dim, true, rng),
            dec1: Linear::init_uniform(dim, dim, true, rng),
            dec2: Linear::init_uniform(dim, out, true, rng),
        })
    }

    pub fn zeros(dim: usize, kind: StrategyKind) -> Self {
        let out = dim * kind.decoder_width_factor().max(1);
        Self {
            kind,
            layer1: Linear::zeros(dim, dim, true),
            head_mu: Linear::zeros(dim, dim, true),
            head_logvar: Linear::zeros(dim, dim, true),
            dec1: Linear::zeros(dim, dim, true),
            dec2: Linear::zeros(dim, out, true),
        }
    }

    pub fn dim(&self) -> usize {
        self.layer1.fan_in()
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(Linear::param_count).sum()
    }

    fn layers(&self) -> impl Iterator<Item = &Linear> {
        [&self.layer1, &self.head_mu, &self.head_logvar, &self.dec1, &self.dec2].into_iter()
    }

    /// Parameters in [`PERTURBATOR_TENSORS`] order.
    pub fn parameters(&self) -> Vec<&Parameter> {
        self.layers().flat_map(|l| l.parameters()).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        [
            &mut self.layer1,
            &mut self.head_mu,
            &mut self.head_logvar,
            &mut self.dec1,
            &mut self.dec2,
        ]
        .into_iter()
        .flat_map(|l| l.parameters_mut())
        .collect()
    }

    pub fn zero_grad(&mut self) {
        self.parameters_mut().into_iter().for_each(Parameter::zero_grad);
    }

    /// Returns `(hidden_pre, hidden, mu, logvar)`.
    pub fn encode_full(&self, x: &Matrix) -> Result<(Matrix, Matrix, Matrix, Matrix)> {
        let hidden_pre = self.layer1.forward(x)?;
        let hidden = leaky_relu(&hidden_pre, LEAKY_SLOPE);
        let mu = self.head_mu.forward(&hidden)?;
        let logvar = self.head_logvar.forward(&hidden)?;
        Ok((hidden_pre, hidden, mu, logvar))
    }

    pub fn encode(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let (_, _, mu, logvar) = self.encode_full(x)?;
        Ok((mu, logvar))
    }

    /// Returns `(dec_pre, dec_hidden, output)`.
    pub fn decode_full(&self, z: &Matrix) -> Result<(Matrix, Matrix, PerturbationOutput)> {
        let dec_pre = self.dec1.forward(z)?;
        let dec_hidden = leaky_relu(&dec_pre, LEAKY_SLOPE);
        let raw = self.dec2.forward(&dec_hidden)?;
        let output = self.split_output(&raw);
        Ok((dec_pre, dec_hidden, output))
    }

    pub fn decode(&self, z: &Matrix) -> Result<PerturbationOutput> {
        Ok(self.decode_full(z)?.2)
    }

    /// Raw decoder output (2D or D wide) before splitting into `(alpha, beta)`.
    pub fn decode_raw(&self, z: &Matrix) -> Result<Matrix> {
        let hidden = leaky_relu(&self.dec1.forward(z)?, LEAKY_SLOPE);
        self.dec2.forward(&hidden)
    }

    fn split_output(&self, raw: &Matrix) -> PerturbationOutput {
        let d = self.dim();
        let n = raw.rows();
        let mut out = PerturbationOutput::identity(n, d);
        for i in 0..n {
            let row = raw.row(i);
            match self.kind {
                StrategyKind::LinearMap | StrategyKind::AddMult => {
                    out.alpha.row_mut(i).copy_from_slice(&row[..d]);
                    out.beta.row_mut(i).copy_from_slice(&row[d..]);
                }
                StrategyKind::Mult => out.alpha.row_mut(i).copy_from_slice(row),
                StrategyKind::Add => out.beta.row_mut(i).copy_from_slice(row),
                StrategyKind::Gaussian => {}
            }
        }
        out
    }

    fn merge_output_grad(&self, ga: &Matrix, gb: &Matrix) -> Matrix {
        match self.kind {
            StrategyKind::LinearMap | StrategyKind::AddMult => {
                let (n, d) = ga.shape();
                let mut g = Matrix::zeros(n, 2 * d);
                for i in 0..n {
                    g.row_mut(i)[..d].copy_from_slice(ga.row(i));
                    g.row_mut(i)[d..].copy_from_slice(gb.row(i));
                }
                g
            }
            StrategyKind::Mult => ga.clone(),
            StrategyKind::Add | StrategyKind::Gaussian => gb.clone(),
        }
    }

    /// Full pass `x → (mu, logvar) → z → (alpha, beta) → x̃` with the given `eps`.
    pub fn forward(&self, x: &Matrix, eps: &Matrix) -> Result<PerturbatorPass> {
        let (hidden_pre, hidden, mu, logvar) = self.encode_full(x)?;
        let latent = reparameterize(&mu, &logvar, eps)?;
        let (dec_pre, dec_hidden, output) = self.decode_full(&latent.z)?;
        let perturbed = apply_adaptive(self.kind, x, &output)?;
        Ok(PerturbatorPass {
            input: x.clone(),
            hidden_pre,
            hidden,
            latent,
            dec_pre,
            dec_hidden,
            output,
            perturbed,
        })
    }

    /// Accumulates parameter gradients for
    /// `⟨grad_perturbed, x̃⟩ + noise_weight·Σᵢ L_n(i) + kl_weight·Σᵢ D_KL(i)`.
    pub fn backward(
        &mut self,
        pass: &PerturbatorPass,
        grad_perturbed: &Matrix,
        noise_weight: f64,
        kl_weight: f64,
    ) -> Result<()> {
        let (mut ga, mut gb) = apply_adaptive_backward(self.kind, &pass.input, &pass.output, grad_perturbed);
        if noise_weight != 0.0 {
            for i in 0..ga.rows() {
                let (na, nb) = noise_constraint_grad(pass.output.alpha.row(i), pass.output.beta.row(i));
                for (g, v) in ga.row_mut(i).iter_mut().zip(na) {
                    *g += noise_weight * v;
                }
                for (g, v) in gb.row_mut(i).iter_mut().zip(nb) {
                    *g += noise_weight * v;
                }
            }
        }
        let grad_raw = self.merge_output_grad(&ga, &gb);
        let g_dec_hidden = self.dec2.backward(&grad_raw, &pass.dec_hidden)?;
        let g_dec_pre = leaky_relu_backward(&g_dec_hidden, &pass.dec_pre, LEAKY_SLOPE)?;
        let gz = self.dec1.backward(&g_dec_pre, &pass.latent.z)?;

        let lat = &pass.latent;
        let mut gmu = gz.clone();
        let mut glogvar = Matrix::zeros(gz.rows(), gz.cols());
        for i in 0..gz.rows() {
            let (kmu, klv) = kl_grad(lat.mu.row(i), lat.logvar.row(i));
            let (lv, eps, gzr) = (lat.logvar.row(i), lat.eps.row(i), gz.row(i));
            for (d, o) in glogvar.row_mut(i).iter_mut().enumerate() {
                *o = gzr[d] * eps[d] * 0.5 * (0.5 * lv[d]).exp() + kl_weight * klv[d];
            }
            for (o, k) in gmu.row_mut(i).iter_mut().zip(kmu) {
                *o += kl_weight * k;
            }
        }
        let mut g_hidden = self.head_mu.backward(&gmu, &pass.hidden)?;
        g_hidden.add_assign(&self.head_logvar.backward(&glogvar, &pass.hidden)?)?;
        let g_hidden_pre = leaky_relu_backward(&g_hidden, &pass.hidden_pre, LEAKY_SLOPE)?;
        self.layer1.backward(&g_hidden_pre, &pass.input)?;
        Ok(())
    }
}

impl PerturbatorPass {
    pub fn kl_loss(&self) -> f64 {
        let n = self.latent.mu.rows();
        (0..n)
            .map(|i| kl_divergence(self.latent.mu.row(i), self.latent.logvar.row(i)))
            .sum::<f64>()
            / n as f64
    }
}
