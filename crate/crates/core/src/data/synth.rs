//! Gaussian blob features for desk-scale experiments.
//!
//! Normal rows are drawn from `N(0, Σ₁)` and anomalous rows from
//! `N(separation·u, Σ₂)` for a random unit direction `u`. Geometry (`u` and
//! the axis order of anisotropic spreads) depends only on `seed`; `stream`
//! selects an independent sample stream, so a training file and a
//! validation file can share one geometry.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::format::{Dtype, FeatureFile};
use crate::error::{PlumeError, Result};
use crate::tensor::Matrix;

pub const NORMAL_LABEL: i32 = 0;
pub const ANOMALY_LABEL: i32 = 1;

/// Per-axis standard deviations of a diagonal covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Covariance {
    Isotropic { std: f64 },
    /// Standard deviations spaced geometrically from `max_std` to `min_std`,
    /// assigned to axes in a seeded random order.
    Anisotropic { max_std: f64, min_std: f64 },
}

impl Default for Covariance {
    fn default() -> Self {
        Covariance::Isotropic { std: 1.0 }
    }
}

impl Covariance {
    fn stds(&self, dim: usize, axis_order: &[usize]) -> Vec<f64> {
        match *self {
            Covariance::Isotropic { std } => vec![std; dim],
            Covariance::Anisotropic { max_std, min_std } => {
                let mut out = vec![0.0; dim];
                for (k, &axis) in axis_order.iter().enumerate() {
                    let t = if dim > 1 { k as f64 / (dim - 1) as f64 } else { 0.0 };
                    out[axis] = max_std * (min_std / max_std).powf(t);
                }
                out
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Covariance::Isotropic { std } => std > 0.0,
            Covariance::Anisotropic { max_std, min_std } => max_std > 0.0 && min_std > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(PlumeError::Config(format!("covariance spreads must be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub dim: usize,
    pub n_normal: usize,
    pub n_anomaly: usize,
    pub separation: f64,
    pub normal_cov: Covariance,
    pub anomaly_cov: Covariance,
    pub seed: u64,
    pub stream: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            dim: 32,
            n_normal: 1000,
            n_anomaly: 0,
            separation: 6.0,
            normal_cov: Covariance::default(),
            anomaly_cov: Covariance::default(),
            seed: 0,
            stream: 0,
        }
    }
}

/// Geometry shared by every stream of one seed.
#[derive(Debug, Clone)]
pub struct BlobGeometry {
    pub direction: Vec<f64>,
    pub normal_std: Vec<f64>,
    pub anomaly_std: Vec<f64>,
}

impl SynthSpec {
    pub fn geometry(&self) -> BlobGeometry {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut direction: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        let len = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        direction.iter_mut().for_each(|v| *v /= len);
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.shuffle(&mut rng);
        BlobGeometry {
            direction,
            normal_std: self.normal_cov.stds(self.dim, &order),
            anomaly_std: self.anomaly_cov.stds(self.dim, &order),
        }
    }
}

/// Normal rows first (label 0), then anomalous rows (label 1).
pub fn synth_blobs(spec: &SynthSpec) -> Result<FeatureFile> {
    if !(spec.separation >= 0.0) {
        return Err(PlumeError::Config(format!("separation must be >= 0, got {}", spec.separation)));
    }
    if spec.dim == 0 {
        return Err(PlumeError::Config("dim must be positive".into()));
    }
    spec.normal_cov.validate()?;
    spec.anomaly_cov.validate()?;
    let geo = spec.geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(spec.stream.wrapping_add(1));

    let rows = spec.n_normal + spec.n_anomaly;
    let mut data = Vec::with_capacity(rows * spec.dim);
    let mut labels = Vec::with_capacity(rows);
    for i in 0..rows {
        let anomalous = i >= spec.n_normal;
        let stds = if anomalous { &geo.anomaly_std } else { &geo.normal_std };
        for d in 0..spec.dim {
            let n: f64 = rng.sample(StandardNormal);
            let center = if anomalous { spec.separation * geo.direction[d] } else { 0.0 };
            data.push(center + stds[d] * n);
        }
        labels.push(if anomalous { ANOMALY_LABEL } else { NORMAL_LABEL });
    }
    FeatureFile::new(Matrix::new(rows, spec.dim, data)?, labels, Dtype::F64)
}
