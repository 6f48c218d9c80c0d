use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::model::{ParamGrads, ParamStore, Tensor};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Cosine multiplier for step `t` of `total`: 1 at the first step, 0 at the last.
pub fn cosine_multiplier(t: usize, total: usize) -> f64 {
    if total <= 1 {
        return 1.0;
    }
    0.5 * (1.0 + (PI * t.min(total - 1) as f64 / (total - 1) as f64).cos())
}

/// Rescales `grads` so their global norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_grad_norm(grads: &mut ParamGrads, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

/// AdamW with weight decay applied directly to the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl AdamW {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|(_, t)| Tensor::zeros(t.rows, t.cols)).collect();
        Self { m: zeros.clone(), v: zeros, step: 0 }
    }

    /// One update with schedule multiplier `eta`:
    /// `p ← p − eta·(lr·m̂/(√v̂ + ε) + wd·p)`.
    pub fn update(&mut self, params: &mut ParamStore, grads: &ParamGrads, lr: f64, weight_decay: f64, eta: f64) {
        self.step += 1;
        let bc1 = 1.0 - BETA1.powi(self.step as i32);
        let bc2 = 1.0 - BETA2.powi(self.step as i32);
        for (i, p) in params.tensors_mut().enumerate() {
            let g = grads.get(crate::model::ParamId(i));
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.data.len() {
                let gj = g.data[j];
                m.data[j] = BETA1 * m.data[j] + (1.0 - BETA1) * gj;
                v.data[j] = BETA2 * v.data[j] + (1.0 - BETA2) * gj * gj;
                let mhat = m.data[j] / bc1;
                let vhat = v.data[j] / bc2;
                p.data[j] -= eta * (lr * mhat / (vhat.sqrt() + ADAM_EPS) + weight_decay * p.data[j]);
            }
        }
    }
}
