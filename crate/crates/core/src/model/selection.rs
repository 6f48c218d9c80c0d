use super::ModelError;

/// Indices of the `min(k, |valid|)` valid entries with the highest
/// utility, ties going to the lower index, in ascending index order.
pub fn topk_set(utilities: &[f64], valid: &[bool], k: usize) -> Vec<usize> {
    assert_eq!(utilities.len(), valid.len());
    let mut idx: Vec<usize> = (0..utilities.len()).filter(|&i| valid[i]).collect();
    idx.sort_by(|&a, &b| utilities[b].total_cmp(&utilities[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Softmax of `u / τ` restricted to the top-`k` valid entries.
pub fn topk_weights(utilities: &[f64], valid: &[bool], k: usize, temperature: f64) -> Result<Vec<f64>, ModelError> {
    if utilities.len() != valid.len() {
        return Err(ModelError::Contract("utilities and validity mask differ in length".into()));
    }
    if !valid.iter().any(|&v| v) {
        return Err(ModelError::Domain("no valid views to select from".into()));
    }
    if !(temperature > 0.0) {
        return Err(ModelError::Domain(format!("temperature must be positive, got {temperature}")));
    }
    if k == 0 {
        return Err(ModelError::Domain("k must be at least 1".into()));
    }
    let set = topk_set(utilities, valid, k);
    let peak = set.iter().map(|&i| utilities[i] / temperature).fold(f64::NEG_INFINITY, f64::max);
    let mut alpha = vec![0.0; utilities.len()];
    let mut total = 0.0;
    for &i in &set {
        alpha[i] = (utilities[i] / temperature - peak).exp();
        total += alpha[i];
    }
    for &i in &set {
        alpha[i] /= total;
    }
    Ok(alpha)
}

/// Uniform weights over `members` of a `len`-slot vector.
pub fn uniform_weights(len: usize, members: &[usize]) -> Vec<f64> {
    let mut alpha = vec![0.0; len];
    for &i in members {
        alpha[i] = 1.0 / members.len() as f64;
    }
    alpha
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let a = topk_weights(&[1.0, 0.0, -1.0], &[true; 3], 2, 1.0).unwrap();
        assert!((a[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((a[1] - 0.268_941_421_369_995_1).abs() < 1e-12);
        assert_eq!(a[2], 0.0);
        let a = topk_weights(&[0.0; 3], &[true; 3], 3, 1.0).unwrap();
        assert!(a.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(topk_weights(&[0.3, 2.0, 1.0], &[true, false, false], 2, 1.0).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(topk_weights(&[0.3], &[false], 1, 1.0).is_err());
    }

    #[test]
    fn ties_go_low() {
        assert_eq!(topk_set(&[1.0, 1.0, 1.0, 1.0], &[true; 4], 2), vec![0, 1]);
        assert_eq!(topk_set(&[0.0, 1.0, 1.0, 1.0], &[true, true, false, true], 2), vec![1, 3]);
    }
}
