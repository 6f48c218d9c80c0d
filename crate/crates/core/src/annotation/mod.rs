//! View-level aesthetic scores to scene-level labels, plus dataset statistics.

pub mod csv_io;
pub mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{parse_annotation_csv, read_annotation_csv, write_annotation_csv, RowError, CSV_HEADER};
pub use stats::{
    attribute_correlations, dataset_summary, label_consistency, percentile_linear, score_gap_stats, AnnotationStats,
    AttributeCorrelations, DatasetSummary, GapStats, VariantSummary,
};

pub const ATTRIBUTES: [&str; 8] = [
    "composition",
    "visual_elements",
    "technical",
    "originality",
    "theme",
    "emotion",
    "gestalt",
    "comprehensive",
];

/// Upper end of the raw annotator scale.
pub const RAW_SCALE: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum AnnotationError {
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("scene {0} has no annotated views")]
    NoViews(String),
    #[error("annotation header mismatch: {0}")]
    Header(String),
    #[error("{0}")]
    Domain(String),
    #[error("csv error: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewLevelAnnotation {
    pub scene_id: String,
    pub view_id: String,
    pub total: f64,
    /// In [`ATTRIBUTES`] order.
    pub attributes: [f64; 8],
    pub text: Option<String>,
}

impl ViewLevelAnnotation {
    /// This view's score on `[0, 1]` under `variant`.
    pub fn normalized(&self, variant: LabelVariant) -> f64 {
        match variant {
            LabelVariant::Total => self.total / RAW_SCALE,
            LabelVariant::Attr8 => self.attributes.iter().sum::<f64>() / 8.0 / RAW_SCALE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LabelVariant {
    Total,
    #[default]
    Attr8,
}

impl LabelVariant {
    pub fn name(self) -> &'static str {
        match self {
            LabelVariant::Total => "total",
            LabelVariant::Attr8 => "attr8",
        }
    }
}

impl std::str::FromStr for LabelVariant {
    type Err = AnnotationError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "total" => Ok(LabelVariant::Total),
            "attr8" | "8-attr" => Ok(LabelVariant::Attr8),
            other => Err(AnnotationError::Domain(format!("unknown label variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLabel {
    pub scene_id: String,
    pub value: f64,
    pub variant: LabelVariant,
    pub view_count: usize,
}

pub fn build_attribute_prompt(attr_name: &str) -> Result<String, AnnotationError> {
    if !ATTRIBUTES.contains(&attr_name) {
        return Err(AnnotationError::UnknownAttribute(attr_name.to_string()));
    }
    Ok(format!(
        "Rate the aesthetic quality of this image from the aspect of {attr_name} on a 0\u{2013}100 scale. Output only one number."
    ))
}

/// Mean normalized view score of one scene.
pub fn aggregate_scene_score(views: &[ViewLevelAnnotation], variant: LabelVariant) -> Result<SceneLabel, AnnotationError> {
    let Some(first) = views.first() else {
        return Err(AnnotationError::Domain("cannot aggregate an empty view list".into()));
    };
    if let Some(v) = views.iter().find(|v| v.scene_id != first.scene_id) {
        return Err(AnnotationError::Domain(format!(
            "views from scenes {} and {} mixed in one aggregation",
            first.scene_id, v.scene_id
        )));
    }
    let value = views.iter().map(|v| v.normalized(variant)).sum::<f64>() / views.len() as f64;
    Ok(SceneLabel { scene_id: first.scene_id.clone(), value, variant, view_count: views.len() })
}

pub fn group_by_scene(annotations: &[ViewLevelAnnotation]) -> BTreeMap<String, Vec<ViewLevelAnnotation>> {
    let mut out: BTreeMap<String, Vec<ViewLevelAnnotation>> = BTreeMap::new();
    for a in annotations {
        out.entry(a.scene_id.clone()).or_default().push(a.clone());
    }
    out
}

/// One entry of the label file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub total: f64,
    pub attr8: f64,
    pub view_count: usize,
}

impl LabelEntry {
    pub fn get(&self, variant: LabelVariant) -> f64 {
        match variant {
            LabelVariant::Total => self.total,
            LabelVariant::Attr8 => self.attr8,
        }
    }
}

pub type LabelFile = BTreeMap<String, LabelEntry>;

pub fn build_label_file(annotations: &[ViewLevelAnnotation]) -> LabelFile {
    group_by_scene(annotations)
        .into_iter()
        .map(|(id, views)| {
            let total = aggregate_scene_score(&views, LabelVariant::Total).expect("grouped views are non-empty");
            let attr8 = aggregate_scene_score(&views, LabelVariant::Attr8).expect("grouped views are non-empty");
            (id, LabelEntry { total: total.value, attr8: attr8.value, view_count: views.len() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn view(scene: &str, id: &str, total: f64, attr: f64) -> ViewLevelAnnotation {
        ViewLevelAnnotation {
            scene_id: scene.into(),
            view_id: id.into(),
            total,
            attributes: [attr; 8],
            text: None,
        }
    }

    #[test]
    fn prompt() {
        assert_eq!(
            build_attribute_prompt("composition").unwrap(),
            "Rate the aesthetic quality of this image from the aspect of composition on a 0–100 scale. Output only one number."
        );
        assert!(build_attribute_prompt("gestalt").unwrap().contains("aspect of gestalt on"));
        assert_eq!(
            build_attribute_prompt("depth_of_field"),
            Err(AnnotationError::UnknownAttribute("depth_of_field".into()))
        );
    }

    #[test]
    fn aggregation_examples() {
        let l = aggregate_scene_score(&[view("s", "a", 40.0, 0.0), view("s", "b", 60.0, 0.0)], LabelVariant::Total).unwrap();
        assert!((l.value - 0.5).abs() < 1e-15);
        assert_eq!(l.view_count, 2);
        let l = aggregate_scene_score(&[view("s", "a", 37.0, 0.0)], LabelVariant::Total).unwrap();
        assert!((l.value - 0.37).abs() < 1e-15);
        let l = aggregate_scene_score(&[view("s", "a", 0.0, 50.0)], LabelVariant::Attr8).unwrap();
        assert_eq!(l.value, 0.5);
        assert!(aggregate_scene_score(&[], LabelVariant::Total).is_err());
    }

    #[test]
    fn aggregation_ignores_view_order() {
        let views = vec![view("s", "a", 12.0, 30.0), view("s", "b", 77.0, 41.0), view("s", "c", 55.5, 90.0)];
        let mut rev = views.clone();
        rev.reverse();
        for variant in [LabelVariant::Total, LabelVariant::Attr8] {
            let a = aggregate_scene_score(&views, variant).unwrap().value;
            let b = aggregate_scene_score(&rev, variant).unwrap().value;
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn label_file_has_both_variants() {
        let f = build_label_file(&[view("a", "1", 40.0, 20.0), view("b", "1", 60.0, 80.0), view("a", "2", 60.0, 40.0)]);
        assert_eq!(f.len(), 2);
        assert!((f["a"].total - 0.5).abs() < 1e-15);
        assert!((f["a"].attr8 - 0.3).abs() < 1e-15);
        assert_eq!(f["a"].view_count, 2);
    }
}
