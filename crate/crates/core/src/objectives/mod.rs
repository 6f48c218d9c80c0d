//! Robust regression plus pairwise ranking, with analytic gradients.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub huber_delta: f64,
    pub rank_weight: f64,
    pub margin: f64,
    pub pair_gap: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { huber_delta: 1.0, rank_weight: 0.1, margin: 0.05, pair_gap: 0.03 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.huber_delta > 0.0) {
            return Err(format!("huber_delta must be positive, got {}", self.huber_delta));
        }
        for (name, v) in [("rank_weight", self.rank_weight), ("margin", self.margin), ("pair_gap", self.pair_gap)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

pub fn huber(prediction: f64, target: f64, delta: f64) -> f64 {
    let r = prediction - target;
    if r.abs() <= delta {
        0.5 * r * r
    } else {
        delta * (r.abs() - 0.5 * delta)
    }
}

/// d huber / d prediction.
pub fn huber_grad(prediction: f64, target: f64, delta: f64) -> f64 {
    (prediction - target).clamp(-delta, delta)
}

/// Pairs `(i, j)`, `i < j`, whose targets differ by strictly more than `eps`.
pub fn rank_pairs(targets: &[f64], eps: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..targets.len() {
        for j in i + 1..targets.len() {
            if (targets[i] - targets[j]).abs() > eps {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean pairwise hinge over [`rank_pairs`]; zero when there are no pairs.
pub fn rank_loss(predictions: &[f64], targets: &[f64], margin: f64, eps: f64) -> f64 {
    assert_eq!(predictions.len(), targets.len());
    let pairs = rank_pairs(targets, eps);
    if pairs.is_empty() {
        return 0.0;
    }
    let sum: f64 = pairs
        .iter()
        .map(|&(i, j)| (margin - sign(targets[i] - targets[j]) * (predictions[i] - predictions[j])).max(0.0))
        .sum();
    sum / pairs.len() as f64
}

/// Gradient of [`rank_loss`] with respect to the predictions.
///
/// A hinge sitting exactly at its kink contributes nothing.
pub fn rank_loss_grad(predictions: &[f64], targets: &[f64], margin: f64, eps: f64) -> Vec<f64> {
    let mut grad = vec![0.0; predictions.len()];
    let pairs = rank_pairs(targets, eps);
    if pairs.is_empty() {
        return grad;
    }
    let w = 1.0 / pairs.len() as f64;
    for &(i, j) in &pairs {
        let s = sign(targets[i] - targets[j]);
        if margin - s * (predictions[i] - predictions[j]) > 0.0 {
            grad[i] -= s * w;
            grad[j] += s * w;
        }
    }
    grad
}

pub fn mean_huber(predictions: &[f64], targets: &[f64], delta: f64) -> f64 {
    assert_eq!(predictions.len(), targets.len());
    let n = predictions.len() as f64;
    predictions.iter().zip(targets).map(|(&p, &t)| huber(p, t, delta)).sum::<f64>() / n
}

pub fn total_loss(predictions: &[f64], targets: &[f64], config: &LossConfig) -> f64 {
    assert!(!predictions.is_empty(), "loss over an empty batch");
    mean_huber(predictions, targets, config.huber_delta)
        + config.rank_weight * rank_loss(predictions, targets, config.margin, config.pair_gap)
}

/// Gradient of [`total_loss`] with respect to each prediction.
pub fn total_loss_grad(predictions: &[f64], targets: &[f64], config: &LossConfig) -> Vec<f64> {
    let n = predictions.len() as f64;
    let rank = rank_loss_grad(predictions, targets, config.margin, config.pair_gap);
    predictions
        .iter()
        .zip(targets)
        .zip(rank)
        .map(|((&p, &t), r)| huber_grad(p, t, config.huber_delta) / n + config.rank_weight * r)
        .collect()
}
