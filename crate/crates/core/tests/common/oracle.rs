//! Direct, loop-by-loop evaluations used as independent references.
#![allow(dead_code)]

/// `(I + αβᵀ)·x` with the matrix written out.
pub fn explicit_rank1(x: &[f64], alpha: &[f64], beta: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut a = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            a[i][j] = if i == j { 1.0 } else { 0.0 } + alpha[i] * beta[j];
        }
    }
    (0..d).map(|i| (0..d).map(|j| a[i][j] * x[j]).sum()).collect()
}

pub fn bce(p: f64, y: f64) -> f64 {
    -(y * p.max(1e-12).ln() + (1.0 - y) * (1.0 - p).max(1e-12).ln())
}

pub fn kl(mu: &[f64], logvar: &[f64]) -> f64 {
    let mut total = 0.0;
    for k in 0..mu.len() {
        let var = logvar[k].exp();
        total += -0.5 * (1.0 + logvar[k] - mu[k] * mu[k] - var);
    }
    total
}

pub fn noise_constraint(alpha: &[f64], beta: &[f64]) -> f64 {
    let mut total = 0.0;
    for k in 0..alpha.len() {
        total += (alpha[k] - 1.0).powi(2) + beta[k].powi(2);
    }
    total
}

pub fn cosine(v1: &[f64], v2: &[f64], tau: f64) -> f64 {
    let mut dot = 0.0;
    let mut n1 = 0.0;
    let mut n2 = 0.0;
    for k in 0..v1.len() {
        dot += v1[k] * v2[k];
        n1 += v1[k] * v1[k];
        n2 += v2[k] * v2[k];
    }
    dot / (n1.sqrt() * n2.sqrt()) / tau
}

/// Mean over anchors of the per-anchor contrastive loss, every (i, j, l) term spelled out.
pub fn contrastive_full(z: &[Vec<f64>], zt: &[Vec<f64>], tau: f64) -> f64 {
    let n = z.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut denom = 0.0;
        for l in 0..n {
            denom += cosine(&z[i], &zt[l], tau).exp();
            if l != i {
                denom += cosine(&z[i], &z[l], tau).exp();
            }
        }
        let mut li = 0.0;
        for j in 0..n {
            if j != i {
                li += -(cosine(&z[i], &z[j], tau).exp() / denom).ln();
            }
        }
        total += li / (n - 1) as f64;
    }
    total / n as f64
}

fn column_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; rows[0].len()];
    for r in rows {
        for (a, v) in m.iter_mut().zip(r) {
            *a += v / rows.len() as f64;
        }
    }
    m
}

pub fn contrastive_mean(z: &[Vec<f64>], zt: &[Vec<f64>], tau: f64) -> f64 {
    let zn = column_mean(z);
    let zp = column_mean(zt);
    let mut total = 0.0;
    for zi in z {
        let a = cosine(zi, &zn, tau).exp();
        let b = cosine(zi, &zp, tau).exp();
        total += -(a / (a + b)).ln();
    }
    total / z.len() as f64
}

/// Pairwise Mann–Whitney count with ties worth one half.
pub fn pairwise_auc(scores: &[f64], is_normal: &[bool]) -> f64 {
    let mut twice_u: u64 = 0;
    let mut pos = 0u64;
    let mut neg = 0u64;
    for i in 0..scores.len() {
        if !is_normal[i] {
            continue;
        }
        pos += 1;
        for j in 0..scores.len() {
            if is_normal[j] {
                continue;
            }
            if scores[i] > scores[j] {
                twice_u += 2;
            } else if scores[i] == scores[j] {
                twice_u += 1;
            }
        }
    }
    for n in is_normal {
        if !n {
            neg += 1;
        }
    }
    twice_u as f64 / (2 * pos * neg) as f64
}
