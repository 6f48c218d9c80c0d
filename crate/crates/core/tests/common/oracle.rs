//! Brute-force recomputation of annotation statistics from raw CSV text.

use std::collections::BTreeMap;

use aes3d_core::annotation::AnnotationStats;

pub struct Oracle {
    pub scenes: usize,
    pub views: usize,
    /// Per scene: normalized view scores for total and attr8.
    pub total: Vec<Vec<f64>>,
    pub attr8: Vec<Vec<f64>>,
    /// Per scene: mean of each attribute on [0, 1].
    pub attrs: Vec<[f64; 8]>,
}

pub fn from_csv(text: &str) -> Oracle {
    let mut by_scene: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    let mut views = 0;
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        let nums: Vec<f64> = cells[2..11].iter().map(|c| c.parse().unwrap()).collect();
        by_scene.entry(cells[0].to_string()).or_default().push(nums);
        views += 1;
    }
    let mut o = Oracle { scenes: by_scene.len(), views, total: vec![], attr8: vec![], attrs: vec![] };
    for rows in by_scene.values() {
        o.total.push(rows.iter().map(|r| r[0] / 100.0).collect());
        o.attr8.push(rows.iter().map(|r| r[1..].iter().sum::<f64>() / 8.0 / 100.0).collect());
        let mut a = [0.0; 8];
        for (k, slot) in a.iter_mut().enumerate() {
            *slot = rows.iter().map(|r| r[k + 1]).sum::<f64>() / rows.len() as f64 / 100.0;
        }
        o.attrs.push(a);
    }
    o
}

fn avg(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn interp(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (s.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

fn corr(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (avg(x), avg(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

fn ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&w| w < v).count() as f64;
            let same = x.iter().filter(|&&w| w == v).count() as f64;
            below + (same + 1.0) / 2.0
        })
        .collect()
}

/// Every mismatch between `stats` and the oracle, as text.
///
/// Counts, extrema, order statistics and threshold fractions must agree
/// bit for bit; correlation coefficients to 1e-12.
pub fn mismatches(stats: &AnnotationStats, o: &Oracle) -> Vec<String> {
    let mut bad = Vec::new();
    let mut exact = |name: &str, got: f64, want: f64| {
        if got.to_bits() != want.to_bits() {
            bad.push(format!("{name}: {got} != {want}"));
        }
    };
    exact("scenes", stats.summary.scenes as f64, o.scenes as f64);
    exact("views", stats.summary.views as f64, o.views as f64);
    for (label, per_scene, summary, gap) in [
        ("total", &o.total, &stats.summary.total, &stats.gap_total),
        ("attr8", &o.attr8, &stats.summary.attr8, &stats.gap_attr8),
    ] {
        let labels: Vec<f64> = per_scene.iter().map(|v| avg(v)).collect();
        let m = avg(&labels);
        exact(&format!("{label}.mean"), summary.mean, m);
        exact(&format!("{label}.median"), summary.median, interp(&labels, 0.5));
        let var = labels.iter().map(|v| (v - m).powi(2)).sum::<f64>() / labels.len() as f64;
        exact(&format!("{label}.std"), summary.std, var.sqrt());
        exact(&format!("{label}.min"), summary.min, labels.iter().cloned().fold(f64::INFINITY, f64::min));
        exact(&format!("{label}.max"), summary.max, labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max));

        let gaps: Vec<f64> = per_scene
            .iter()
            .map(|v| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min))
            .collect();
        let n = gaps.len() as f64;
        exact(&format!("{label}.gap.mean"), gap.mean, avg(&gaps));
        exact(&format!("{label}.gap.median"), gap.median, interp(&gaps, 0.5));
        exact(&format!("{label}.gap.p90"), gap.p90, interp(&gaps, 0.9));
        exact(&format!("{label}.gap.max"), gap.max, gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        exact(&format!("{label}.gap.>0.20"), gap.frac_above_020, gaps.iter().filter(|&&g| g > 0.2).count() as f64 / n);
        exact(&format!("{label}.gap.>0.30"), gap.frac_above_030, gaps.iter().filter(|&&g| g > 0.3).count() as f64 / n);
    }

    let mut close = |name: String, got: f64, want: f64| {
        if (got - want).abs() > 1e-12 {
            bad.push(format!("{name}: {got} != {want}"));
        }
    };
    let tl: Vec<f64> = o.total.iter().map(|v| avg(v)).collect();
    let al: Vec<f64> = o.attr8.iter().map(|v| avg(v)).collect();
    close("consistency.pearson".into(), stats.consistency.pearson, corr(&tl, &al));
    close("consistency.spearman".into(), stats.consistency.spearman, corr(&ranks(&tl), &ranks(&al)));
    match &stats.correlations {
        None => bad.push("attribute correlations missing".into()),
        Some(c) => {
            let cols: Vec<Vec<f64>> = (0..8).map(|k| o.attrs.iter().map(|a| a[k]).collect()).collect();
            for i in 0..8 {
                for j in 0..8 {
                    let flat = |k: usize| cols[k].iter().all(|&v| v == cols[k][0]);
                    let (p, s) = if flat(i) || flat(j) {
                        (0.0, 0.0)
                    } else if i == j {
                        (1.0, 1.0)
                    } else {
                        (corr(&cols[i], &cols[j]), corr(&ranks(&cols[i]), &ranks(&cols[j])))
                    };
                    close(format!("pearson[{i}][{j}]"), c.pearson[i][j], p);
                    close(format!("spearman[{i}][{j}]"), c.spearman[i][j], s);
                }
            }
        }
    }
    bad
}
