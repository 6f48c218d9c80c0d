//! Browser bindings: view tokenization of a procedural scene, top-K view
//! weights, and farthest point sampling. Results are flat `Float64Array`s.

use aes3d_core::geometry::{assign_to_grid, fps_subsample, normalize_points, project_point};
use aes3d_core::model;
use aes3d_core::synth::{generate_scene, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

const DEMO_POINTS: usize = 1200;
const DEMO_CAMERAS: usize = 24;

/// `[score, cameras, g, g² cell counts.., then (u, v, depth, r, g, b) per visible primitive]`.
pub fn project_scene_flat(scene_seed: u64, view: usize, grid: usize) -> Result<Vec<f64>, String> {
    if grid == 0 || grid > 64 {
        return Err(format!("grid side {grid} outside 1..=64"));
    }
    let config = SynthConfig { scenes: 1, points: DEMO_POINTS, cameras: DEMO_CAMERAS, seed: scene_seed };
    let synth = generate_scene(&config, 0);
    let scene = &synth.scene;
    let (centers, norm) = normalize_points(&scene.centers);
    let camera = norm.apply_camera(&scene.cameras[view % scene.cameras.len()]);
    let projected: Vec<_> = centers.iter().map(|p| project_point(p, &camera)).collect();
    let mut out = vec![synth.score, scene.cameras.len() as f64, grid as f64];
    let mut counts = vec![0.0; grid * grid];
    for (cell, members) in assign_to_grid(&projected, grid) {
        counts[cell] = members.len() as f64;
    }
    out.extend(counts);
    for (p, c) in projected.iter().zip(&scene.colors) {
        if p.visible {
            out.extend([p.uv[0], p.uv[1], p.depth, c[0], c[1], c[2]]);
        }
    }
    Ok(out)
}

pub fn topk_weights_flat(utilities: &[f64], k: usize, tau: f64) -> Result<Vec<f64>, String> {
    let valid = vec![true; utilities.len()];
    model::topk_weights(utilities, &valid, k, tau).map_err(|e| e.to_string())
}

/// `[x, y] × n` uniform points in the unit square, then the `select` chosen indices in pick order.
pub fn fps_flat(n: usize, select: usize, seed: u64) -> Result<Vec<f64>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<[f64; 3]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>(), 0.0]).collect();
    let picked = fps_subsample(&pts, select, seed).map_err(|e| e.to_string())?;
    let mut out: Vec<f64> = pts.iter().flat_map(|p| [p[0], p[1]]).collect();
    out.extend(picked.iter().map(|&i| i as f64));
    Ok(out)
}

#[wasm_bindgen]
pub fn project_scene(scene_seed: u32, view: u32, grid: u32) -> Result<Vec<f64>, JsError> {
    project_scene_flat(scene_seed.into(), view as usize, grid as usize).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn topk_weights(utilities: Vec<f64>, k: u32, tau: f64) -> Result<Vec<f64>, JsError> {
    topk_weights_flat(&utilities, k as usize, tau).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn fps_demo(n: u32, select: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    fps_flat(n as usize, select as usize, seed.into()).map_err(|e| JsError::new(&e))
}
