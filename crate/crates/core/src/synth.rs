//! Procedural Gaussian scenes with a planted scene-level score.
//!
//! Used by the end-to-end tests, the ablation smoke runs and `aes3d synth`.
//! The score is a fixed smooth function of color statistics and spatial
//! spread measured on the generated primitives themselves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::annotation::{ViewLevelAnnotation, RAW_SCALE};
use crate::geometry::{look_at_target, normalize_points};
use crate::ingest::{rgb_to_sh_dc, sh_dc_to_rgb, GaussianScene, Vec3};
use crate::util::derive_seed;

pub const SCORE_MIN: f64 = 0.15;
pub const SCORE_MAX: f64 = 0.85;

/// Degree-1 SH rest coefficients per primitive.
const SYNTH_SH_REST: usize = 9;
const IMAGE_SIZE: f64 = 800.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub scenes: usize,
    pub points: usize,
    pub cameras: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { scenes: 200, points: 512, cameras: 40, seed: 7 }
    }
}

#[derive(Debug, Clone)]
pub struct SynthScene {
    pub scene: GaussianScene,
    pub score: f64,
}

/// Statistics the planted score is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneStats {
    /// Mean Rec. 601 luma.
    pub luminance: f64,
    /// Mean per-primitive `max(rgb) - min(rgb)`.
    pub colorfulness: f64,
    /// Mean distance to the centroid over the 95th-percentile radius.
    pub spread: f64,
}

pub fn scene_stats(centers: &[Vec3], colors: &[Vec3]) -> SceneStats {
    let n = colors.len() as f64;
    let luminance = colors.iter().map(|c| 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]).sum::<f64>() / n;
    let colorfulness = colors
        .iter()
        .map(|c| c.iter().cloned().fold(f64::MIN, f64::max) - c.iter().cloned().fold(f64::MAX, f64::min))
        .sum::<f64>()
        / n;
    let (normalized, _) = normalize_points(centers);
    let spread = normalized.iter().map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()).sum::<f64>()
        / normalized.len() as f64;
    SceneStats { luminance, colorfulness, spread }
}

/// Maps scene statistics into `[SCORE_MIN, SCORE_MAX]`.
pub fn planted_score(stats: &SceneStats) -> f64 {
    let z = 7.0 * (stats.luminance - 0.51) + 4.0 * (stats.colorfulness - 0.34) + 3.0 * (stats.spread - 0.6);
    SCORE_MIN + (SCORE_MAX - SCORE_MIN) / (1.0 + (-z).exp())
}

pub fn scene_id(index: usize) -> String {
    format!("synth_{index:04}")
}

/// One procedural scene: a few Gaussian blobs at a random world scale and
/// offset, hue-shifted colors around a scene-level luminance, and cameras
/// on a sphere looking at the centroid.
pub fn generate_scene(config: &SynthConfig, index: usize) -> SynthScene {
    let id = scene_id(index);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &["synth", &id]));
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let tau = std::f64::consts::TAU;

    let world_scale = rng.random_range(0.5..5.0);
    let offset: Vec3 = [0, 1, 2].map(|_| rng.random_range(-10.0..10.0));
    let blobs = rng.random_range(1..=6usize);
    let blob_sigma = rng.random_range(0.06..0.45);
    let blob_centers: Vec<Vec3> = (0..blobs)
        .map(|_| {
            let d: Vec3 = [0, 1, 2].map(|_| normal.sample(&mut rng));
            let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().max(1e-9);
            let r = rng.random::<f64>().cbrt();
            d.map(|c| c / len * r)
        })
        .collect();
    let base_lum = rng.random_range(0.2..0.8);
    let chroma = rng.random_range(0.02..0.4);
    let hue = rng.random::<f64>();

    let n = config.points.max(1);
    let mut centers = Vec::with_capacity(n);
    let mut sh_dc = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    let mut opacity = Vec::with_capacity(n);
    let mut scales = Vec::with_capacity(n);
    let mut rotations = Vec::with_capacity(n);
    let mut sh_rest = Vec::with_capacity(n);
    for _ in 0..n {
        let b = blob_centers[rng.random_range(0..blobs)];
        let p: Vec3 = [0, 1, 2].map(|k| offset[k] + world_scale * (b[k] + blob_sigma * normal.sample(&mut rng)));
        centers.push(p);
        let h = tau * (hue + 0.08 * normal.sample(&mut rng));
        let rgb: Vec3 = [0.0, -tau / 3.0, tau / 3.0]
            .map(|phase| (base_lum + chroma * (h + phase).cos() + 0.03 * normal.sample(&mut rng)).clamp(0.01, 0.99));
        let dc = rgb_to_sh_dc(rgb);
        colors.push(sh_dc_to_rgb(dc).expect("finite coefficients"));
        sh_dc.push(dc);
        opacity.push(1.5 * normal.sample(&mut rng));
        scales.push([0, 1, 2].map(|_| (world_scale * blob_sigma * rng.random_range(0.05..0.3)).ln()));
        let q: [f64; 4] = [0, 1, 2, 3].map(|_| normal.sample(&mut rng));
        let qn = q.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        rotations.push(q.map(|v| v / qn));
        sh_rest.push((0..SYNTH_SH_REST).map(|_| 0.05 * normal.sample(&mut rng)).collect());
    }

    let (_, norm) = normalize_points(&centers);
    let distance = 2.5 * norm.radius;
    let cameras = (0..config.cameras)
        .map(|k| {
            // Fibonacci sphere with a per-scene phase.
            let m = config.cameras as f64;
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / m;
            let r = (1.0 - z * z).sqrt();
            let th = k as f64 * std::f64::consts::PI * (3.0 - 5f64.sqrt()) + tau * hue;
            let eye = [
                norm.centroid[0] + distance * r * th.cos(),
                norm.centroid[1] + distance * r * th.sin(),
                norm.centroid[2] + distance * z,
            ];
            let focal = IMAGE_SIZE * 0.866 * rng.random_range(0.9..1.1);
            look_at_target(&format!("view_{k:03}"), eye, norm.centroid, focal, IMAGE_SIZE)
        })
        .collect();

    let score = planted_score(&scene_stats(&centers, &colors));
    let scene = GaussianScene {
        scene_id: id,
        centers,
        colors,
        sh_dc: Some(sh_dc),
        opacity: Some(opacity),
        scales: Some(scales),
        rotations: Some(rotations),
        sh_rest: Some(sh_rest),
        cameras,
    };
    SynthScene { scene, score }
}

pub fn generate_dataset(config: &SynthConfig) -> Vec<SynthScene> {
    (0..config.scenes).map(|i| generate_scene(config, i)).collect()
}

const ATTRIBUTE_BIAS: [f64; 8] = [0.02, -0.03, 0.05, -0.04, 0.01, 0.03, -0.02, -0.02];

/// View-level annotations scattered around each planted score: one row
/// per camera, scores on the raw 0–100 scale rounded to one decimal.
pub fn synth_annotations(scenes: &[SynthScene], seed: u64) -> Vec<ViewLevelAnnotation> {
    let mut rows = Vec::new();
    for s in scenes {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["annotate", &s.scene.scene_id]));
        let view_noise = Normal::new(0.0, 0.06).expect("sigma > 0");
        let attr_noise = Normal::new(0.0, 0.05).expect("sigma > 0");
        let raw = |v: f64| ((v * RAW_SCALE).clamp(0.0, RAW_SCALE) * 10.0).round() / 10.0;
        for (k, cam) in s.scene.cameras.iter().enumerate() {
            let d = view_noise.sample(&mut rng);
            let attributes = ATTRIBUTE_BIAS.map(|b| raw(s.score + b + d + attr_noise.sample(&mut rng)));
            let total = raw(s.score - 0.03 + 1.2 * d + attr_noise.sample(&mut rng));
            let text = (k == 0).then(|| format!("overall impression of {}", s.scene.scene_id));
            rows.push(ViewLevelAnnotation {
                scene_id: s.scene.scene_id.clone(),
                view_id: cam.view_id.clone(),
                total,
                attributes,
                text,
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig { scenes: 60, points: 300, cameras: 12, seed: 3 }
    }

    #[test]
    fn scenes_are_valid_and_reproducible() {
        let a = generate_scene(&small(), 5);
        let b = generate_scene(&small(), 5);
        a.scene.validate().unwrap();
        assert_eq!(a.scene, b.scene);
        assert_eq!(a.scene.cameras.len(), 12);
        assert!(a.scene.has_full_attributes());
        assert_ne!(generate_scene(&small(), 6).scene.centers, a.scene.centers);
    }

    #[test]
    fn scores_cover_the_target_range() {
        let scores: Vec<f64> = generate_dataset(&small()).iter().map(|s| s.score).collect();
        let lo = scores.iter().cloned().fold(f64::MAX, f64::min);
        let hi = scores.iter().cloned().fold(f64::MIN, f64::max);
        assert!(scores.iter().all(|s| (SCORE_MIN..=SCORE_MAX).contains(s)));
        assert!(lo < 0.3 && hi > 0.7, "range [{lo}, {hi}]");
    }

    #[test]
    fn score_ignores_world_scale_and_offset() {
        let s = generate_scene(&small(), 1);
        let moved: Vec<Vec3> = s.scene.centers.iter().map(|p| p.map(|c| 3.0 * c - 7.0)).collect();
        let a = planted_score(&scene_stats(&s.scene.centers, &s.scene.colors));
        let b = planted_score(&scene_stats(&moved, &s.scene.colors));
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn every_camera_sees_the_scene() {
        use crate::geometry::project_point;
        let s = generate_scene(&small(), 2);
        for cam in &s.scene.cameras {
            let seen = s.scene.centers.iter().filter(|p| project_point(p, cam).visible).count();
            assert!(seen * 2 > s.scene.len(), "{} sees {seen}", cam.view_id);
        }
    }

    #[test]
    fn annotations_track_the_planted_score() {
        let scenes = generate_dataset(&SynthConfig { scenes: 8, ..small() });
        let rows = synth_annotations(&scenes, 1);
        assert_eq!(rows.len(), 8 * 12);
        let labels = crate::annotation::build_label_file(&rows);
        for s in &scenes {
            let l = &labels[&s.scene.scene_id];
            assert!((l.attr8 - s.score).abs() < 0.08, "{} vs {}", l.attr8, s.score);
        }
    }
}
