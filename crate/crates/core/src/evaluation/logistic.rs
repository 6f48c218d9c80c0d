use super::correlation::{mean, pearson, zero_variance};

/// `β₁(½ − 1/(1 + exp(β₂(x − β₃)))) + β₄`.
pub fn logistic4(beta: &[f64; 4], x: f64) -> f64 {
    beta[0] * (0.5 - sigmoid_neg(beta[1] * (x - beta[2]))) + beta[3]
}

/// `1 / (1 + exp(w))` without overflow.
fn sigmoid_neg(w: f64) -> f64 {
    if w >= 0.0 {
        let e = (-w).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + w.exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticFit {
    pub plcc: f64,
    /// Parameters on the original prediction scale.
    pub params: [f64; 4],
    pub sse: f64,
    pub degenerate: bool,
}

fn sse(beta: &[f64; 4], z: &[f64], t: &[f64]) -> f64 {
    z.iter().zip(t).map(|(&x, &y)| (logistic4(beta, x) - y).powi(2)).sum()
}

/// Levenberg–Marquardt on the four logistic parameters.
fn levenberg_marquardt(mut beta: [f64; 4], z: &[f64], t: &[f64]) -> ([f64; 4], f64) {
    let mut cost = sse(&beta, z, t);
    let mut mu = 1e-3;
    for _ in 0..1000 {
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for (&x, &y) in z.iter().zip(t) {
            let s = sigmoid_neg(beta[1] * (x - beta[2]));
            let ds = s * (1.0 - s);
            let j = [0.5 - s, beta[0] * ds * (x - beta[2]), -beta[0] * ds * beta[1], 1.0];
            let r = logistic4(&beta, x) - y;
            for a in 0..4 {
                jtr[a] += j[a] * r;
                for b in 0..4 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        while mu < 1e12 {
            let mut m = jtj;
            for (a, row) in m.iter_mut().enumerate() {
                row[a] += mu * (jtj[a][a] + 1e-12);
            }
            let rhs = jtr.map(|v| -v);
            let Some(step) = solve4(m, rhs) else {
                mu *= 10.0;
                continue;
            };
            let cand = [beta[0] + step[0], beta[1] + step[1], beta[2] + step[2], beta[3] + step[3]];
            let c = sse(&cand, z, t);
            if c.is_finite() && c < cost {
                let rel = (cost - c) / cost.max(1e-300);
                beta = cand;
                cost = c;
                mu = (mu / 10.0).max(1e-12);
                improved = rel > 1e-14;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (beta, cost)
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[piv][col].abs() > 1e-300) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let tail: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Fits the four-parameter logistic from predictions to targets and
/// returns the Pearson correlation of the fitted curve with the targets.
///
/// Predictions are standardized before fitting so the result does not
/// depend on their affine scale. Two starts are tried: the conventional
/// one and a nearly linear curve through the least-squares line; the
/// lower residual wins.
pub fn logistic_fit_plcc(predictions: &[f64], targets: &[f64]) -> LogisticFit {
    assert_eq!(predictions.len(), targets.len());
    if zero_variance(predictions) || zero_variance(targets) {
        return LogisticFit { plcc: 0.0, params: [0.0; 4], sse: f64::NAN, degenerate: true };
    }
    let mp = mean(predictions);
    let sp = (predictions.iter().map(|p| (p - mp).powi(2)).sum::<f64>() / predictions.len() as f64).sqrt();
    let z: Vec<f64> = predictions.iter().map(|p| (p - mp) / sp).collect();
    let t_max = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let t_min = targets.iter().copied().fold(f64::INFINITY, f64::min);
    let mt = mean(targets);

    let conventional = [t_max - t_min, 1.0, 0.0, mt];
    // standardized z has unit variance, so the affine slope is cov(z, t)
    let slope = z.iter().zip(targets).map(|(a, b)| a * (b - mt)).sum::<f64>() / z.len() as f64;
    let flat = 1e-3;
    let near_linear = [4.0 * slope / flat, flat, 0.0, mt];

    let mut best: Option<([f64; 4], f64)> = None;
    for start in [conventional, near_linear] {
        let (beta, cost) = levenberg_marquardt(start, &z, targets);
        if cost.is_finite() && best.is_none_or(|(_, c)| cost < c) {
            best = Some((beta, cost));
        }
    }
    let Some((beta, cost)) = best else {
        return LogisticFit { plcc: pearson(predictions, targets), params: [0.0; 4], sse: f64::NAN, degenerate: true };
    };
    let fitted: Vec<f64> = z.iter().map(|&x| logistic4(&beta, x)).collect();
    let params = [beta[0], beta[1] / sp, mp + beta[2] * sp, beta[3]];
    LogisticFit { plcc: pearson(&fitted, targets), params, sse: cost, degenerate: false }
}
