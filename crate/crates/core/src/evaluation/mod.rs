//! Correlation metrics, logistic fitting, calibration and seed aggregation.

pub mod correlation;
pub mod logistic;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use correlation::{average_ranks, kendall, mean, pearson, spearman, zero_variance};
pub use logistic::{logistic4, logistic_fit_plcc, LogisticFit};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no reports to aggregate")]
    Empty,
    #[error("report {index} has no value for {metric}")]
    MissingMetric { index: usize, metric: String },
}

pub fn mae(p: &[f64], t: &[f64]) -> f64 {
    assert_eq!(p.len(), t.len());
    p.iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64
}

pub fn rmse(p: &[f64], t: &[f64]) -> f64 {
    assert_eq!(p.len(), t.len());
    (p.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / p.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// After logistic fitting.
    pub plcc: f64,
    pub plcc_raw: f64,
    pub srcc: f64,
    pub krcc: f64,
    pub mae: f64,
    pub rmse: f64,
    pub n: usize,
    pub logistic_params: [f64; 4],
    pub degenerate: bool,
}

impl MetricsReport {
    pub const METRICS: [&'static str; 6] = ["plcc", "plcc_raw", "srcc", "krcc", "mae", "rmse"];

    /// Computes every metric on predictions clamped to `[0, 1]`.
    pub fn compute(predictions: &[f64], targets: &[f64]) -> Self {
        assert_eq!(predictions.len(), targets.len());
        let p: Vec<f64> = predictions.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let fit = if p.len() >= 5 {
            logistic_fit_plcc(&p, targets)
        } else {
            LogisticFit { plcc: pearson(&p, targets), params: [0.0; 4], sse: f64::NAN, degenerate: true }
        };
        let degenerate = fit.degenerate || zero_variance(&p) || zero_variance(targets);
        Self {
            plcc: fit.plcc,
            plcc_raw: pearson(&p, targets),
            srcc: spearman(&p, targets),
            krcc: kendall(&p, targets),
            mae: mae(&p, targets),
            rmse: rmse(&p, targets),
            n: p.len(),
            logistic_params: fit.params,
            degenerate,
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "plcc" => Some(self.plcc),
            "plcc_raw" => Some(self.plcc_raw),
            "srcc" => Some(self.srcc),
            "krcc" => Some(self.krcc),
            "mae" => Some(self.mae),
            "rmse" => Some(self.rmse),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}±{:.3}", self.mean, self.std)
    }
}

/// Mean and population standard deviation of each metric across runs.
pub fn aggregate_seed_runs(reports: &[MetricsReport]) -> Result<BTreeMap<String, MeanStd>, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut out = BTreeMap::new();
    for name in MetricsReport::METRICS {
        let mut values = Vec::with_capacity(reports.len());
        for (index, r) in reports.iter().enumerate() {
            match r.metric(name) {
                Some(v) if v.is_finite() => values.push(v),
                _ => return Err(EvalError::MissingMetric { index, metric: name.to_string() }),
            }
        }
        out.insert(name.to_string(), mean_std(&values));
    }
    Ok(out)
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64;
    MeanStd { mean: m, std: var.sqrt() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub a: f64,
    pub b: f64,
    pub degenerate: bool,
}

impl Calibration {
    pub fn apply(&self, prediction: f64) -> f64 {
        self.a * prediction + self.b
    }
}

/// Least-squares `ỹ = a·ŷ + b` on training predictions only.
pub fn linear_calibration(train_predictions: &[f64], train_targets: &[f64]) -> Calibration {
    assert_eq!(train_predictions.len(), train_targets.len());
    assert!(!train_targets.is_empty());
    let mt = mean(train_targets);
    if zero_variance(train_predictions) {
        log::warn!("linear calibration on constant predictions; falling back to the target mean");
        return Calibration { a: 0.0, b: mt, degenerate: true };
    }
    let mp = mean(train_predictions);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&p, &t) in train_predictions.iter().zip(train_targets) {
        sxy += (p - mp) * (t - mt);
        sxx += (p - mp) * (p - mp);
    }
    let a = sxy / sxx;
    Calibration { a, b: mt - a * mp, degenerate: false }
}

/// Fits the calibration on the train split, then scores the frozen remap
/// of the test predictions.
pub fn calibrated_evaluation(
    train_predictions: &[f64],
    train_targets: &[f64],
    test_predictions: &[f64],
    test_targets: &[f64],
) -> (Calibration, MetricsReport) {
    let cal = linear_calibration(train_predictions, train_targets);
    let remapped: Vec<f64> = test_predictions.iter().map(|&p| cal.apply(p)).collect();
    (cal, MetricsReport::compute(&remapped, test_targets))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrivialKind {
    Mean,
    Median,
}

/// The constant a trivial predictor outputs.
pub fn trivial_predictor(train_targets: &[f64], kind: TrivialKind) -> f64 {
    assert!(!train_targets.is_empty(), "trivial predictor on no targets");
    match kind {
        TrivialKind::Mean => mean(train_targets),
        TrivialKind::Median => {
            let mut s = train_targets.to_vec();
            s.sort_by(f64::total_cmp);
            let n = s.len();
            if n % 2 == 1 {
                s[n / 2]
            } else {
                0.5 * (s[n / 2 - 1] + s[n / 2])
            }
        }
    }
}
