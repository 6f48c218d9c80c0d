use super::GeometryError;
use crate::ingest::Vec3;

/// Greedy farthest point sampling.
///
/// Returns every index in order when `n >= points.len()`. Otherwise the first
/// pick is `seed mod len`, and each following pick maximises the squared
/// distance to the already-selected set, ties going to the lowest index.
pub fn fps_subsample(points: &[Vec3], n: usize, seed: u64) -> Result<Vec<usize>, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::Domain("farthest point sampling on an empty cloud".into()));
    }
    if n == 0 {
        return Err(GeometryError::Domain("farthest point sampling of zero points".into()));
    }
    let len = points.len();
    if n >= len {
        return Ok((0..len).collect());
    }
    let first = (seed % len as u64) as usize;
    let mut selected = Vec::with_capacity(n);
    let mut chosen = vec![false; len];
    let mut min_dist = vec![f64::INFINITY; len];
    let mut current = first;
    for _ in 0..n {
        selected.push(current);
        chosen[current] = true;
        let p = points[current];
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, q) in points.iter().enumerate() {
            if chosen[i] {
                continue;
            }
            let d = sq_dist(&p, q);
            if d < min_dist[i] {
                min_dist[i] = d;
            }
            if min_dist[i] > best_d {
                best_d = min_dist[i];
                best = i;
            }
        }
        current = best;
    }
    Ok(selected)
}

#[inline]
pub(crate) fn sq_dist(a: &Vec3, b: &Vec3) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    dx * dx + dy * dy + dz * dz
}
