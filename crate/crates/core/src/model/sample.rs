use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::annotation::LabelVariant;
use crate::ingest::{CameraView, Vec3};

/// Everything one forward pass needs for one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSample {
    pub scene_id: String,
    /// `N × F`; padded rows are zero.
    pub features: Tensor,
    /// Normalized centers; padded rows are zero.
    pub positions: Vec<Vec3>,
    /// `true` for real primitives.
    pub mask: Vec<bool>,
    /// At most `V` candidate cameras in the normalized frame; slots past
    /// the end are padding.
    pub cameras: Vec<CameraView>,
    pub target: f64,
    pub label_variant: LabelVariant,
}

impl SceneSample {
    pub fn n_points(&self) -> usize {
        self.positions.len()
    }

    pub fn valid_points(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn positions_tensor(&self) -> Tensor {
        Tensor::from_vec(self.positions.len(), 3, self.positions.iter().flatten().copied().collect())
    }
}
