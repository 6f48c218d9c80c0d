use serde::{Deserialize, Serialize};

use super::{batch_loss_and_grads, TrainError};
use crate::model::{Aes3dNet, ParamId, SceneSample};
use crate::objectives::{total_loss, LossConfig};

/// Relative errors are measured against at least this magnitude.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckFailure {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose perturbation changed some top-K set.
    pub skipped_membership: usize,
    pub failures: Vec<GradCheckFailure>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Evaluation-mode loss of `samples` and every sample's top-K set.
pub fn loss_and_sets(net: &Aes3dNet, samples: &[SceneSample], loss: &LossConfig) -> Result<(f64, Vec<Vec<usize>>), TrainError> {
    let mut preds = Vec::with_capacity(samples.len());
    let mut sets = Vec::with_capacity(samples.len());
    for s in samples {
        let t = net.predict(s)?;
        preds.push(t.prediction);
        sets.push(t.selected);
    }
    let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
    Ok((total_loss(&preds, &targets, loss), sets))
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares back-propagated gradients of the evaluation-mode batch loss
/// with central differences of step `h`, coordinate by coordinate.
pub fn grad_check(
    net: &mut Aes3dNet,
    samples: &[SceneSample],
    loss: &LossConfig,
    h: f64,
    tolerance: f64,
) -> Result<GradCheckReport, TrainError> {
    let (_, grads, _) = batch_loss_and_grads(net, samples, loss, None)?;
    let (_, base_sets) = loss_and_sets(net, samples, loss)?;
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0, skipped_membership: 0, failures: Vec::new() };
    let ids: Vec<ParamId> = net.params.ids().collect();
    for id in ids {
        for j in 0..net.params.get(id).len() {
            let orig = net.params.get(id).data[j];
            net.params.get_mut(id).data[j] = orig + h;
            let (up, up_sets) = loss_and_sets(net, samples, loss)?;
            net.params.get_mut(id).data[j] = orig - h;
            let (down, down_sets) = loss_and_sets(net, samples, loss)?;
            net.params.get_mut(id).data[j] = orig;
            if up_sets != base_sets || down_sets != base_sets {
                report.skipped_membership += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.get(id).data[j];
            let err = rel_error(analytic, numeric);
            report.checked += 1;
            report.max_rel_error = report.max_rel_error.max(err);
            if err >= tolerance {
                report.failures.push(GradCheckFailure {
                    param: net.params.name(id).to_string(),
                    index: j,
                    analytic,
                    numeric,
                    rel_error: err,
                });
            }
        }
    }
    Ok(report)
}
