//! Loss terms and their batch combination.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{PlumeError, Result};
use crate::tensor::{dot, norm, Matrix};

pub const LOG_CLAMP: f64 = 1e-12;

/// Binary cross-entropy with `ŷ` clamped to `[1e-12, 1 − 1e-12]`.
pub fn bce(y_hat: f64, y: f64) -> f64 {
    let p = y_hat.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// `∂bce/∂logit` when `ŷ = sigmoid(logit)`; zero where the clamp is active.
pub fn bce_logit_grad(y_hat: f64, y: f64) -> f64 {
    if (LOG_CLAMP..=1.0 - LOG_CLAMP).contains(&y_hat) {
        y_hat - y
    } else {
        0.0
    }
}

/// `(1/τ)·cos(v1, v2)`
pub fn cosine_similarity(v1: &[f64], v2: &[f64], tau: f64) -> Result<f64> {
    let (n1, n2) = (norm(v1), norm(v2));
    if n1 == 0.0 || n2 == 0.0 {
        return Err(PlumeError::DegenerateEmbedding("cosine_similarity"));
    }
    Ok(dot(v1, v2) / (n1 * n2) / tau)
}

/// Loss value with gradients for the normal and pseudo-anomaly embeddings.
#[derive(Debug, Clone)]
pub struct ContrastiveOutput {
    pub loss: f64,
    pub grad_normal: Matrix,
    pub grad_pseudo: Matrix,
}

fn unit_rows(m: &Matrix, what: &'static str) -> Result<(Matrix, Vec<f64>)> {
    let mut out = m.clone();
    let mut norms = Vec::with_capacity(m.rows());
    for r in 0..m.rows() {
        let n = norm(m.row(r));
        if n == 0.0 || !n.is_finite() {
            return Err(PlumeError::DegenerateEmbedding(what));
        }
        out.row_mut(r).iter_mut().for_each(|v| *v /= n);
        norms.push(n);
    }
    Ok((out, norms))
}

/// Maps a gradient on `u/‖u‖` back to `u`.
fn unit_backward(grad_unit: &[f64], unit: &[f64], len: f64) -> Vec<f64> {
    let proj = dot(grad_unit, unit);
    grad_unit
        .iter()
        .zip(unit)
        .map(|(g, u)| (g - proj * u) / len)
        .collect()
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Full contrastive guidance averaged over the batch.
///
/// For each normal anchor `i`, every other normal `j` is a positive; the
/// softmax denominator holds all `N` pseudo-anomaly embeddings and the `N − 1`
/// other normals.
pub fn contrastive_full(normal: &Matrix, pseudo: &Matrix, tau: f64) -> Result<ContrastiveOutput> {
    let n = normal.rows();
    if n < 2 {
        return Err(PlumeError::BatchTooSmall {
            op: "contrastive_full",
            required: 2,
            actual: n,
        });
    }
    if pseudo.shape() != normal.shape() {
        return Err(PlumeError::Dimension {
            op: "contrastive_full",
            left: normal.shape(),
            right: pseudo.shape(),
        });
    }
    let (un, norms_n) = unit_rows(normal, "contrastive_full (normal)")?;
    let (up, norms_p) = unit_rows(pseudo, "contrastive_full (pseudo)")?;
    let mut s_nn = un.matmul_t(&un)?;
    let mut s_np = un.matmul_t(&up)?;
    s_nn.scale_in_place(1.0 / tau);
    s_np.scale_in_place(1.0 / tau);

    let inv_n = 1.0 / n as f64;
    let inv_pos = 1.0 / (n - 1) as f64;
    let mut loss = 0.0;
    // ∂L/∂s, pre-scaled by 1/τ so it applies directly to the cosine
    let mut g_nn = Matrix::zeros(n, n);
    let mut g_np = Matrix::zeros(n, n);
    for i in 0..n {
        let (row_nn, row_np) = (s_nn.row(i), s_np.row(i));
        let others = row_nn.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v);
        let lse = log_sum_exp(row_np.iter().copied().chain(others.clone()));
        let positives: f64 = others.sum();
        loss += lse - inv_pos * positives;
        for j in 0..n {
            if j != i {
                g_nn.set(i, j, inv_n / tau * ((row_nn[j] - lse).exp() - inv_pos));
            }
            g_np.set(i, j, inv_n / tau * (row_np[j] - lse).exp());
        }
    }
    loss *= inv_n;

    // s_ij = ûᵢ·ûⱼ feeds both anchors; s_il = ûᵢ·ṽₗ
    let mut g_un = g_nn.matmul(&un)?;
    g_un.add_assign(&g_nn.t_matmul(&un)?)?;
    g_un.add_assign(&g_np.matmul(&up)?)?;
    let g_up = g_np.t_matmul(&un)?;

    let mut grad_normal = Matrix::zeros(n, normal.cols());
    let mut grad_pseudo = Matrix::zeros(n, normal.cols());
    for r in 0..n {
        grad_normal
            .row_mut(r)
            .copy_from_slice(&unit_backward(g_un.row(r), un.row(r), norms_n[r]));
        grad_pseudo
            .row_mut(r)
            .copy_from_slice(&unit_backward(g_up.row(r), up.row(r), norms_p[r]));
    }
    Ok(ContrastiveOutput {
        loss,
        grad_normal,
        grad_pseudo,
    })
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn logistic(x: f64) -> f64 {
    crate::tensor::sigmoid(x)
}

/// Contrastive guidance against the batch-mean normal and pseudo-anomaly embeddings.
pub fn contrastive_mean(normal: &Matrix, pseudo: &Matrix, tau: f64) -> Result<ContrastiveOutput> {
    let n = normal.rows();
    if n < 1 || pseudo.rows() < 1 {
        return Err(PlumeError::BatchTooSmall {
            op: "contrastive_mean",
            required: 1,
            actual: n.min(pseudo.rows()),
        });
    }
    if pseudo.cols() != normal.cols() {
        return Err(PlumeError::Dimension {
            op: "contrastive_mean",
            left: normal.shape(),
            right: pseudo.shape(),
        });
    }
    let mean_n = Matrix::row_vector(&normal.column_means());
    let mean_p = Matrix::row_vector(&pseudo.column_means());
    let (un, norms_n) = unit_rows(normal, "contrastive_mean (normal)")?;
    let (a_hat, a_len) = unit_rows(&mean_n, "contrastive_mean (normal mean)")?;
    let (b_hat, b_len) = unit_rows(&mean_p, "contrastive_mean (pseudo mean)")?;
    let (a_hat, b_hat) = (a_hat.row(0), b_hat.row(0));

    let inv_n = 1.0 / n as f64;
    let e = normal.cols();
    let mut loss = 0.0;
    let mut g_un = Matrix::zeros(n, e);
    let mut g_a = vec![0.0; e];
    let mut g_b = vec![0.0; e];
    for i in 0..n {
        let u = un.row(i);
        let a = dot(u, a_hat) / tau;
        let b = dot(u, b_hat) / tau;
        loss += softplus(b - a);
        let p = logistic(b - a) * inv_n / tau;
        for (k, g) in g_un.row_mut(i).iter_mut().enumerate() {
            *g = p * (b_hat[k] - a_hat[k]);
        }
        for k in 0..e {
            g_a[k] -= p * u[k];
            g_b[k] += p * u[k];
        }
    }
    loss *= inv_n;

    let g_mean_n = unit_backward(&g_a, a_hat, a_len[0]);
    let g_mean_p = unit_backward(&g_b, b_hat, b_len[0]);
    let mut grad_normal = Matrix::zeros(n, e);
    for r in 0..n {
        let g = unit_backward(g_un.row(r), un.row(r), norms_n[r]);
        for ((o, gv), m) in grad_normal.row_mut(r).iter_mut().zip(g).zip(&g_mean_n) {
            *o = gv + m * inv_n;
        }
    }
    let np = pseudo.rows();
    let mut grad_pseudo = Matrix::zeros(np, e);
    for r in 0..np {
        for (o, m) in grad_pseudo.row_mut(r).iter_mut().zip(&g_mean_p) {
            *o = m / np as f64;
        }
    }
    Ok(ContrastiveOutput {
        loss,
        grad_normal,
        grad_pseudo,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Guidance {
    None,
    Mean,
    Full,
}

impl Guidance {
    pub const ALL: [Guidance; 3] = [Guidance::None, Guidance::Mean, Guidance::Full];

    pub fn name(self) -> &'static str {
        match self {
            Guidance::None => "none",
            Guidance::Mean => "mean",
            Guidance::Full => "full",
        }
    }

    /// Column label used in ablation tables.
    pub fn table_label(self) -> &'static str {
        match self {
            Guidance::None => "-",
            Guidance::Mean => "✓ (Mean)",
            Guidance::Full => "✓",
        }
    }

    pub fn contrastive(self, normal: &Matrix, pseudo: &Matrix, tau: f64) -> Result<Option<ContrastiveOutput>> {
        match self {
            Guidance::None => Ok(None),
            Guidance::Mean => contrastive_mean(normal, pseudo, tau).map(Some),
            Guidance::Full => contrastive_full(normal, pseudo, tau).map(Some),
        }
    }
}

impl fmt::Display for Guidance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Guidance {
    type Err = PlumeError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| PlumeError::Config(format!("unknown guidance {s:?} (none|mean|full)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda: f64,
    pub nu: f64,
    pub gamma: f64,
    pub tau: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda: 5.0,
            nu: 1.0,
            gamma: 1.0,
            tau: 0.5,
        }
    }
}

/// Batch-averaged loss components. `total = ce + λ·noise + ν·kl + γ·contrastive`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub noise: f64,
    pub kl: f64,
    pub contrastive: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn combine(ce: f64, noise: f64, kl: f64, contrastive: f64, w: &LossWeights) -> Self {
        Self {
            ce,
            noise,
            kl,
            contrastive,
            total: ce + w.lambda * noise + w.nu * kl + w.gamma * contrastive,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.ce, self.noise, self.kl, self.contrastive, self.total]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Component-wise mean of several breakdowns.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        let n = items.len().max(1) as f64;
        let mut acc = LossBreakdown::default();
        for b in items {
            acc.ce += b.ce;
            acc.noise += b.noise;
            acc.kl += b.kl;
            acc.contrastive += b.contrastive;
            acc.total += b.total;
        }
        LossBreakdown {
            ce: acc.ce / n,
            noise: acc.noise / n,
            kl: acc.kl / n,
            contrastive: acc.contrastive / n,
            total: acc.total / n,
        }
    }
}

/// Everything the total loss reads from one forward pass over `B⁺ ∪ B̃⁻`.
pub struct LossInputs<'a> {
    /// `ŷ` for all 2N rows.
    pub scores: &'a [f64],
    /// 1 for normal rows, 0 for pseudo-anomalies.
    pub labels: &'a [f64],
    /// Per-sample α, β (absent for the Gaussian strategy).
    pub noise_params: Option<(&'a Matrix, &'a Matrix)>,
    /// Per-sample μ, log σ² (absent for the Gaussian strategy).
    pub latent: Option<(&'a Matrix, &'a Matrix)>,
    pub normal_embeddings: &'a Matrix,
    pub pseudo_embeddings: &'a Matrix,
}

/// Batch total. CE is averaged over every row of the mixed batch; noise, KL and
/// contrastive terms over the N normal samples.
pub fn total_loss(inputs: &LossInputs<'_>, weights: &LossWeights, guidance: Guidance) -> Result<LossBreakdown> {
    if inputs.scores.len() != inputs.labels.len() || inputs.scores.is_empty() {
        return Err(PlumeError::Dimension {
            op: "total_loss",
            left: (inputs.scores.len(), 1),
            right: (inputs.labels.len(), 1),
        });
    }
    let ce = inputs
        .scores
        .iter()
        .zip(inputs.labels)
        .map(|(&p, &y)| bce(p, y))
        .sum::<f64>()
        / inputs.scores.len() as f64;
    let noise = match inputs.noise_params {
        Some((alpha, beta)) => {
            let n = alpha.rows() as f64;
            (0..alpha.rows())
                .map(|i| crate::perturbator::noise_constraint_loss(alpha.row(i), beta.row(i)))
                .sum::<f64>()
                / n
        }
        None => 0.0,
    };
    let kl = match inputs.latent {
        Some((mu, logvar)) => {
            (0..mu.rows())
                .map(|i| crate::perturbator::kl_divergence(mu.row(i), logvar.row(i)))
                .sum::<f64>()
                / mu.rows() as f64
        }
        None => 0.0,
    };
    let contrastive = guidance
        .contrastive(inputs.normal_embeddings, inputs.pseudo_embeddings, weights.tau)?
        .map_or(0.0, |c| c.loss);
    Ok(LossBreakdown::combine(ce, noise, kl, contrastive, weights))
}
