use serde::{Deserialize, Serialize};

use crate::ingest::{CameraView, GaussianScene, Vec3};

/// Smallest radius a scene is ever divided by.
pub const RADIUS_FLOOR: f64 = 1e-6;

/// The similarity transform `p ↦ (p − centroid) / radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneNormalization {
    pub centroid: Vec3,
    pub radius: f64,
    pub applied: bool,
}

impl SceneNormalization {
    pub fn identity() -> Self {
        Self { centroid: [0.0; 3], radius: 1.0, applied: false }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        let c = &self.centroid;
        [(p[0] - c[0]) / self.radius, (p[1] - c[1]) / self.radius, (p[2] - c[2]) / self.radius]
    }

    pub fn invert(&self, p: &Vec3) -> Vec3 {
        let c = &self.centroid;
        [p[0] * self.radius + c[0], p[1] * self.radius + c[1], p[2] * self.radius + c[2]]
    }

    pub fn apply_camera(&self, cam: &CameraView) -> CameraView {
        cam.with_world_normalized(&self.centroid, self.radius)
    }
}

/// Nearest-rank percentile: the value at 1-based rank `⌈q·n/100⌉` of the sorted input.
pub fn nearest_rank_percentile(values: &[f64], q: usize) -> f64 {
    assert!(!values.is_empty() && q <= 100);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q * sorted.len()).div_ceil(100).max(1);
    sorted[rank - 1]
}

pub fn centroid(points: &[Vec3]) -> Vec3 {
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        for k in 0..3 {
            c[k] += p[k];
        }
    }
    c.map(|v| v / n)
}

/// Centers the scene and divides by its 95th-percentile radius.
///
/// Returns the transformed centers; the same transform must be applied to
/// the cameras via [`SceneNormalization::apply_camera`] (see
/// [`normalize_cameras`]).
pub fn normalize_scene(scene: &GaussianScene) -> (Vec<Vec3>, SceneNormalization) {
    normalize_points(&scene.centers)
}

pub fn normalize_points(points: &[Vec3]) -> (Vec<Vec3>, SceneNormalization) {
    assert!(!points.is_empty(), "normalising an empty scene");
    let c = centroid(points);
    let radii: Vec<f64> = points
        .iter()
        .map(|p| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2)).sqrt())
        .collect();
    let radius = nearest_rank_percentile(&radii, 95).max(RADIUS_FLOOR);
    let norm = SceneNormalization { centroid: c, radius, applied: true };
    (points.iter().map(|p| norm.apply(p)).collect(), norm)
}

pub fn normalize_cameras(cameras: &[CameraView], norm: &SceneNormalization) -> Vec<CameraView> {
    cameras.iter().map(|c| norm.apply_camera(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(points: Vec<Vec3>) -> GaussianScene {
        let n = points.len();
        GaussianScene::from_points("s", points, vec![[0.5; 3]; n])
    }

    #[test]
    fn two_points() {
        let (out, norm) = normalize_scene(&scene(vec![[0.0; 3], [2.0, 0.0, 0.0]]));
        assert_eq!(norm.centroid, [1.0, 0.0, 0.0]);
        assert_eq!(norm.radius, 1.0);
        assert_eq!(out, vec![[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
    }

    #[test]
    fn single_point_uses_floor() {
        let (out, norm) = normalize_scene(&scene(vec![[5.0, 5.0, 5.0]]));
        assert_eq!(out, vec![[0.0; 3]]);
        assert_eq!(norm.radius, RADIUS_FLOOR);
    }

    #[test]
    fn normalized_symmetric_cloud_is_fixed() {
        let pts = vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0]];
        let (out, _) = normalize_scene(&scene(pts.clone()));
        for (a, b) in out.iter().zip(&pts) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn percentile_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(nearest_rank_percentile(&v, 95), 19.0);
        assert_eq!(nearest_rank_percentile(&[3.0], 95), 3.0);
        assert_eq!(nearest_rank_percentile(&[1.0, 2.0], 95), 2.0);
    }

    #[test]
    fn invert_recovers_original() {
        let pts = vec![[1.5, -2.0, 3.25], [4.0, 0.5, -1.0], [0.0, 0.0, 7.0]];
        let (out, norm) = normalize_points(&pts);
        for (o, p) in out.iter().zip(&pts) {
            let back = norm.invert(o);
            for k in 0..3 {
                assert!((back[k] - p[k]).abs() <= 1e-6 * p[k].abs().max(1.0));
            }
        }
    }
}
