use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ingest::{CameraView, Vec3};

pub const AZIMUTH_BINS: usize = 8;
pub const ELEVATION_BINS: usize = 4;
/// Index of the reserved bin for cameras sitting at the origin.
pub const DEGENERATE_BIN: usize = AZIMUTH_BINS * ELEVATION_BINS;

/// Spherical bin of a camera center seen from the origin, z up.
///
/// Azimuth `atan2(y, x)` is split into equal sectors, elevation `asin(z)`
/// into equal bands.
pub fn direction_bin(center: &Vec3) -> usize {
    let norm = (center[0] * center[0] + center[1] * center[1] + center[2] * center[2]).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return DEGENERATE_BIN;
    }
    let az = center[1].atan2(center[0]);
    let el = (center[2] / norm).clamp(-1.0, 1.0).asin();
    let a = (((az + PI) / (2.0 * PI)) * AZIMUTH_BINS as f64).floor() as usize;
    let e = (((el + PI / 2.0) / PI) * ELEVATION_BINS as f64).floor() as usize;
    a.min(AZIMUTH_BINS - 1) + AZIMUTH_BINS * e.min(ELEVATION_BINS - 1)
}

/// Picks at most `v_max` cameras spread across direction bins.
///
/// Bins are visited round-robin in a seeded order, each yielding its
/// cameras in a seeded order; the degenerate bin is visited last. The
/// result is sorted by `view_id`.
pub fn select_candidate_views(cameras: &[CameraView], v_max: usize, seed: u64) -> Vec<CameraView> {
    if cameras.len() <= v_max {
        return sorted_by_id(cameras.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); DEGENERATE_BIN + 1];
    for (i, cam) in cameras.iter().enumerate() {
        bins[direction_bin(&cam.center)].push(i);
    }
    let mut order: Vec<usize> = (0..DEGENERATE_BIN).filter(|&b| !bins[b].is_empty()).collect();
    order.shuffle(&mut rng);
    for members in bins.iter_mut() {
        members.shuffle(&mut rng);
    }
    let mut picked = Vec::with_capacity(v_max);
    let mut round = 0;
    while picked.len() < v_max {
        let mut took = false;
        for &b in &order {
            if picked.len() == v_max {
                break;
            }
            if let Some(&i) = bins[b].get(round) {
                picked.push(i);
                took = true;
            }
        }
        if !took {
            break;
        }
        round += 1;
    }
    let degenerate = &bins[DEGENERATE_BIN];
    picked.extend(degenerate.iter().take(v_max - picked.len()));
    sorted_by_id(picked.into_iter().map(|i| cameras[i].clone()).collect())
}

/// Uniformly random subset of at most `v_max` cameras, sorted by `view_id`.
pub fn select_random_views(cameras: &[CameraView], v_max: usize, seed: u64) -> Vec<CameraView> {
    if cameras.len() <= v_max {
        return sorted_by_id(cameras.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..cameras.len()).collect();
    idx.shuffle(&mut rng);
    sorted_by_id(idx[..v_max].iter().map(|&i| cameras[i].clone()).collect())
}

fn sorted_by_id(mut cams: Vec<CameraView>) -> Vec<CameraView> {
    cams.sort_by(|a, b| a.view_id.cmp(&b.view_id));
    cams
}

/// Look-at camera at `eye` pointing at the origin, z up, square image.
pub fn look_at_camera(view_id: &str, eye: Vec3, focal: f64, size: f64) -> CameraView {
    look_at_target(view_id, eye, [0.0; 3], focal, size)
}

/// Look-at camera at `eye` pointing at `target`, z up, square image.
pub fn look_at_target(view_id: &str, eye: Vec3, target: Vec3, focal: f64, size: f64) -> CameraView {
    let norm = |v: Vec3| {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        v.map(|c| c / n)
    };
    let cross = |a: Vec3, b: Vec3| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let forward = norm([target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]]);
    let up = if forward[2].abs() > 0.99 { [0.0, 1.0, 0.0] } else { [0.0, 0.0, 1.0] };
    let right = norm(cross(forward, up));
    let down = cross(forward, right);
    let rotation = [right, down, forward];
    let r_eye = crate::ingest::camera::mat_vec(&rotation, &eye);
    let translation = r_eye.map(|c| -c);
    CameraView::new(view_id, focal, focal, size / 2.0, size / 2.0, size, size, rotation, translation)
        .expect("look-at rotation is orthonormal")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_cameras(n: usize) -> Vec<CameraView> {
        // Fibonacci sphere
        let golden = PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let th = golden * i as f64;
                look_at_camera(&format!("v{i:03}"), [3.0 * r * th.cos(), 3.0 * r * th.sin(), 3.0 * z], 1.0, 2.0)
            })
            .collect()
    }

    #[test]
    fn few_cameras_all_returned() {
        let cams = sphere_cameras(10);
        assert_eq!(select_candidate_views(&cams, 32, 1).len(), 10);
    }

    #[test]
    fn seeded_selection_is_deterministic() {
        let cams = sphere_cameras(64);
        let a = select_candidate_views(&cams, 32, 9);
        let b = select_candidate_views(&cams, 32, 9);
        assert_eq!(a, b);
        assert_eq!(a.len(), 32);
        assert!(a.windows(2).all(|w| w[0].view_id < w[1].view_id));
    }

    #[test]
    fn every_occupied_bin_gets_its_share() {
        let cams = sphere_cameras(64);
        let mut census = std::collections::BTreeMap::<usize, usize>::new();
        for c in &cams {
            *census.entry(direction_bin(&c.center)).or_default() += 1;
        }
        let share = 32 / census.len();
        for seed in 0..20 {
            let picked = select_candidate_views(&cams, 32, seed);
            let mut got = std::collections::BTreeMap::<usize, usize>::new();
            for c in &picked {
                *got.entry(direction_bin(&c.center)).or_default() += 1;
            }
            for (bin, &avail) in &census {
                assert!(got.get(bin).copied().unwrap_or(0) >= share.min(avail));
            }
        }
    }

    #[test]
    fn degenerate_camera_is_used_last() {
        let mut cams = sphere_cameras(40);
        let i3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        cams.push(CameraView::new("origin", 1.0, 1.0, 1.0, 1.0, 2.0, 2.0, i3, [0.0; 3]).unwrap());
        assert_eq!(direction_bin(&[0.0; 3]), DEGENERATE_BIN);
        let picked = select_candidate_views(&cams, 32, 3);
        assert!(picked.iter().all(|c| c.view_id != "origin"));
        let all = select_candidate_views(&cams, 41, 3);
        assert!(all.iter().any(|c| c.view_id == "origin"));
    }

    #[test]
    fn bins_cover_octants() {
        assert_eq!(direction_bin(&[1.0, 0.0, 0.0]), 4 + 8 * 2);
        assert_eq!(direction_bin(&[0.0, 0.0, 1.0]) / AZIMUTH_BINS, 3);
        assert_eq!(direction_bin(&[0.0, 0.0, -1.0]) / AZIMUTH_BINS, 0);
    }

    #[test]
    fn look_at_centers_the_origin() {
        let cam = look_at_camera("a", [1.0, 2.0, 3.0], 1.0, 2.0);
        let p = crate::geometry::project_point(&[0.0; 3], &cam);
        assert!(p.visible);
        assert!((p.uv[0] - 0.5).abs() < 1e-12 && (p.uv[1] - 0.5).abs() < 1e-12);
        for k in 0..3 {
            assert!((cam.center[k] - [1.0, 2.0, 3.0][k]).abs() < 1e-12);
        }
    }

    #[test]
    fn random_probes_are_seeded_subsets() {
        let cams = sphere_cameras(50);
        let a = select_random_views(&cams, 8, 1);
        assert_eq!(a, select_random_views(&cams, 8, 1));
        assert_eq!(a.len(), 8);
    }
}
