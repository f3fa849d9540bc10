//! ROC-AUC and run aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{PlumeError, Result};

/// One ranked sample; higher `score` means "more normal".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub score: f64,
    pub is_normal: bool,
}

impl ScoredSample {
    pub fn new(score: f64, is_normal: bool) -> Self {
        Self { score, is_normal }
    }
}

/// Area under the ROC curve with normal samples as positives.
///
/// Computed as the Mann–Whitney statistic over tie groups, so tied
/// normal/anomaly pairs count ½. Runs in O(n log n).
pub fn roc_auc(samples: &[ScoredSample]) -> Result<f64> {
    let positives = samples.iter().filter(|s| s.is_normal).count();
    let negatives = samples.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(PlumeError::AucUndefined {
            normals: positives,
            anomalies: negatives,
        });
    }
    if let Some(bad) = samples.iter().find(|s| !s.score.is_finite()) {
        return Err(PlumeError::NonFinite(format!("roc_auc score {}", bad.score)));
    }
    let mut order: Vec<&ScoredSample> = samples.iter().collect();
    order.sort_by(|a, b| a.score.total_cmp(&b.score));

    // twice the U statistic, kept integral so ties stay exact
    let mut twice_u: u128 = 0;
    let mut negatives_below: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let score = order[start].score;
        let mut end = start;
        let (mut group_pos, mut group_neg) = (0u128, 0u128);
        while end < order.len() && order[end].score == score {
            if order[end].is_normal {
                group_pos += 1;
            } else {
                group_neg += 1;
            }
            end += 1;
        }
        twice_u += group_pos * (2 * negatives_below + group_neg);
        negatives_below += group_neg;
        start = end;
    }
    Ok((twice_u as f64 / 2.0) / (positives as f64 * negatives as f64))
}

/// Convenience wrapper over parallel score/label slices.
pub fn roc_auc_from(scores: &[f64], is_normal: &[bool]) -> Result<f64> {
    let samples: Vec<ScoredSample> = scores
        .iter()
        .zip(is_normal)
        .map(|(&s, &n)| ScoredSample::new(s, n))
        .collect();
    roc_auc(&samples)
}

/// Mean and sample standard deviation (n − 1 denominator; 0 for a single value).
pub fn aggregate(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(PlumeError::Empty("aggregate"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}
