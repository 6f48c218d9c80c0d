use std::collections::BTreeMap;

use crate::ingest::{camera::mat_vec, CameraView, Vec3};

/// Points at or closer than this camera-frame depth are discarded.
pub const DEPTH_EPS: f64 = 1e-6;

/// A point seen through one camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    /// Normalized image coordinates; meaningful only when `visible`.
    pub uv: [f64; 2],
    /// Camera-frame z.
    pub depth: f64,
    /// In front of the camera and inside `[0, 1)²`.
    pub visible: bool,
}

impl ProjectedPoint {
    /// Row-major cell `⌊u·g⌋ + g·⌊v·g⌋`, or `None` for discarded points.
    pub fn cell_index(&self, g: usize) -> Option<usize> {
        if !self.visible {
            return None;
        }
        let col = ((self.uv[0] * g as f64).floor() as usize).min(g - 1);
        let row = ((self.uv[1] * g as f64).floor() as usize).min(g - 1);
        Some(col + g * row)
    }
}

/// Pinhole projection with normalized intrinsics.
pub fn project_point(p: &Vec3, camera: &CameraView) -> ProjectedPoint {
    let r = mat_vec(&camera.rotation, p);
    let t = &camera.translation;
    let q = [r[0] + t[0], r[1] + t[1], r[2] + t[2]];
    let depth = q[2];
    if !(depth > DEPTH_EPS) {
        return ProjectedPoint { uv: [f64::NAN; 2], depth, visible: false };
    }
    let [fx, fy, cx, cy] = camera.normalized_intrinsics;
    let uv = [fx * q[0] / depth + cx, fy * q[1] / depth + cy];
    let visible = (0.0..1.0).contains(&uv[0]) && (0.0..1.0).contains(&uv[1]);
    ProjectedPoint { uv, depth, visible }
}

/// Groups visible points by grid cell; discarded points appear nowhere.
pub fn assign_to_grid(projected: &[ProjectedPoint], g: usize) -> BTreeMap<usize, Vec<usize>> {
    assert!(g >= 1, "grid side must be positive");
    let mut cells: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, p) in projected.iter().enumerate() {
        if let Some(c) = p.cell_index(g) {
            cells.entry(c).or_default().push(i);
        }
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;

    const I3: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    fn cam(t: Vec3) -> CameraView {
        CameraView::new("c", 1.0, 1.0, 0.5, 0.5, 1.0, 1.0, I3, t).unwrap()
    }

    #[test]
    fn on_axis_point_hits_center() {
        let p = project_point(&[0.0, 0.0, 2.0], &cam([0.0; 3]));
        assert!(p.visible);
        assert_eq!(p.uv, [0.5, 0.5]);
        assert_eq!(p.depth, 2.0);
    }

    #[test]
    fn behind_camera_is_discarded() {
        assert!(!project_point(&[0.0, 0.0, -1.0], &cam([0.0; 3])).visible);
        assert!(!project_point(&[0.0, 0.0, 0.0], &cam([0.0; 3])).visible);
    }

    #[test]
    fn translation_is_applied() {
        let p = project_point(&[0.0, 0.0, 1.0], &cam([0.0, 0.0, 1.0]));
        assert_eq!((p.uv, p.depth), ([0.5, 0.5], 2.0));
    }

    #[test]
    fn off_frame_is_discarded() {
        // u = 1 * 2 / 1 + 0.5 = 2.5
        assert!(!project_point(&[2.0, 0.0, 1.0], &cam([0.0; 3])).visible);
    }

    #[test]
    fn grid_indices() {
        let at = |u, v| ProjectedPoint { uv: [u, v], depth: 1.0, visible: true };
        assert_eq!(at(0.5, 0.5).cell_index(14), Some(105));
        assert_eq!(at(0.999, 0.0).cell_index(2), Some(1));
        let hidden = ProjectedPoint { uv: [0.5, 0.5], depth: -1.0, visible: false };
        assert!(assign_to_grid(&[hidden, hidden], 4).is_empty());
        let cells = assign_to_grid(&[at(0.1, 0.1), hidden, at(0.2, 0.2), at(0.9, 0.9)], 2);
        assert_eq!(cells[&0], vec![0, 2]);
        assert_eq!(cells[&3], vec![3]);
    }
}
