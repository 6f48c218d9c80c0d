use serde::{Deserialize, Serialize};

use super::{group_by_scene, AnnotationError, LabelVariant, ViewLevelAnnotation, RAW_SCALE};
use crate::evaluation::{mean, pearson, spearman, zero_variance};

/// Percentile with linear interpolation between closest ranks, `q ∈ [0, 1]`.
pub fn percentile_linear(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub scenes: usize,
    pub mean: f64,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
    pub frac_above_020: f64,
    pub frac_above_030: f64,
}

/// Within-scene gap (max − min normalized view score) summarized over scenes.
pub fn score_gap_stats(per_scene: &[Vec<f64>]) -> GapStats {
    assert!(!per_scene.is_empty(), "gap statistics over no scenes");
    let gaps: Vec<f64> = per_scene
        .iter()
        .map(|views| {
            assert!(!views.is_empty(), "scene without views");
            let hi = views.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = views.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .collect();
    let n = gaps.len() as f64;
    GapStats {
        scenes: gaps.len(),
        mean: mean(&gaps),
        median: percentile_linear(&gaps, 0.5),
        p90: percentile_linear(&gaps, 0.9),
        max: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        frac_above_020: gaps.iter().filter(|&&g| g > 0.20).count() as f64 / n,
        frac_above_030: gaps.iter().filter(|&&g| g > 0.30).count() as f64 / n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeCorrelations {
    pub pearson: Vec<Vec<f64>>,
    pub spearman: Vec<Vec<f64>>,
    /// Attributes constant across scenes; their rows and columns are zero.
    pub zero_variance: Vec<bool>,
}

impl AttributeCorrelations {
    /// Smallest and largest off-diagonal Spearman value among informative attributes.
    pub fn spearman_range(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.spearman.len() {
            for j in i + 1..self.spearman.len() {
                if self.zero_variance[i] || self.zero_variance[j] {
                    continue;
                }
                lo = lo.min(self.spearman[i][j]);
                hi = hi.max(self.spearman[i][j]);
            }
        }
        lo.is_finite().then_some((lo, hi))
    }
}

/// Pairwise correlations between the columns of a scene × attribute matrix.
pub fn attribute_correlations(matrix: &[Vec<f64>]) -> Result<AttributeCorrelations, AnnotationError> {
    if matrix.len() < 3 {
        return Err(AnnotationError::Domain(format!("need at least 3 scenes, got {}", matrix.len())));
    }
    let k = matrix[0].len();
    if matrix.iter().any(|row| row.len() != k) {
        return Err(AnnotationError::Domain("ragged attribute matrix".into()));
    }
    let cols: Vec<Vec<f64>> = (0..k).map(|j| matrix.iter().map(|row| row[j]).collect()).collect();
    let flat: Vec<bool> = cols.iter().map(|c| zero_variance(c)).collect();
    let mut p = vec![vec![0.0; k]; k];
    let mut s = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            if flat[i] || flat[j] {
                continue;
            }
            let (pv, sv) = if i == j { (1.0, 1.0) } else { (pearson(&cols[i], &cols[j]), spearman(&cols[i], &cols[j])) };
            p[i][j] = pv;
            p[j][i] = pv;
            s[i][j] = sv;
            s[j][i] = sv;
        }
    }
    Ok(AttributeCorrelations { pearson: p, spearman: s, zero_variance: flat })
}

/// Pearson and Spearman agreement between the two label variants.
pub fn label_consistency(total: &[f64], attr8: &[f64]) -> (f64, f64) {
    (pearson(total, attr8), spearman(total, attr8))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl VariantSummary {
    pub fn of(values: &[f64]) -> Self {
        let m = mean(values);
        Self {
            mean: m,
            median: percentile_linear(values, 0.5),
            std: (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub scenes: usize,
    pub views: usize,
    pub total: VariantSummary,
    pub attr8: VariantSummary,
}

pub fn dataset_summary(annotations: &[ViewLevelAnnotation]) -> Result<DatasetSummary, AnnotationError> {
    let grouped = group_by_scene(annotations);
    if grouped.is_empty() {
        return Err(AnnotationError::Domain("no annotations".into()));
    }
    let labels = |variant: LabelVariant| -> Vec<f64> {
        grouped
            .values()
            .map(|views| views.iter().map(|v| v.normalized(variant)).sum::<f64>() / views.len() as f64)
            .collect()
    };
    Ok(DatasetSummary {
        scenes: grouped.len(),
        views: annotations.len(),
        total: VariantSummary::of(&labels(LabelVariant::Total)),
        attr8: VariantSummary::of(&labels(LabelVariant::Attr8)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    pub pearson: f64,
    pub spearman: f64,
}

/// Everything reported about an annotation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationStats {
    pub summary: DatasetSummary,
    pub gap_attr8: GapStats,
    pub gap_total: GapStats,
    pub correlations: Option<AttributeCorrelations>,
    pub consistency: Consistency,
}

impl AnnotationStats {
    pub fn compute(annotations: &[ViewLevelAnnotation]) -> Result<Self, AnnotationError> {
        let summary = dataset_summary(annotations)?;
        let grouped = group_by_scene(annotations);
        let per_scene = |variant: LabelVariant| -> Vec<Vec<f64>> {
            grouped.values().map(|views| views.iter().map(|v| v.normalized(variant)).collect()).collect()
        };
        let attr_matrix: Vec<Vec<f64>> = grouped
            .values()
            .map(|views| {
                (0..8)
                    .map(|k| views.iter().map(|v| v.attributes[k]).sum::<f64>() / views.len() as f64 / RAW_SCALE)
                    .collect()
            })
            .collect();
        let means = |variant| per_scene(variant).iter().map(|v| mean(v)).collect::<Vec<f64>>();
        let (p, s) = label_consistency(&means(LabelVariant::Total), &means(LabelVariant::Attr8));
        Ok(Self {
            summary,
            gap_attr8: score_gap_stats(&per_scene(LabelVariant::Attr8)),
            gap_total: score_gap_stats(&per_scene(LabelVariant::Total)),
            correlations: attribute_correlations(&attr_matrix).ok(),
            consistency: Consistency { pearson: p, spearman: s },
        })
    }
}
