use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainError;
use crate::annotation::{LabelVariant, SceneLabel};
use crate::geometry::{fps_subsample, normalize_cameras, normalize_scene, select_candidate_views, select_random_views};
use crate::ingest::{CameraView, GaussianScene, Vec3};
use crate::model::{featurize_primitives, FullAttributes, InputVariant, ModelConfig, ProbeSampling, SceneSample, Tensor};
use crate::util::{derive_seed, scene_seed};

/// A scene after the epoch-independent preprocessing: normalization and
/// primitive subsampling.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedScene {
    pub scene_id: String,
    /// Normalized centers of the kept primitives, at most `n_points`.
    pub positions: Vec<Vec3>,
    pub colors: Vec<Vec3>,
    pub full: Option<FullAttributes>,
    /// Every camera of the scene, in the normalized frame.
    pub cameras: Vec<CameraView>,
}

impl PreparedScene {
    pub fn new(scene: &GaussianScene, config: &ModelConfig) -> Result<Self, TrainError> {
        if scene.is_empty() {
            return Err(TrainError::Assembly(format!("scene {} has no primitives", scene.scene_id)));
        }
        let (centers, norm) = normalize_scene(scene);
        let idx = fps_subsample(&centers, config.n_points, scene_seed(&scene.scene_id))
            .map_err(|e| TrainError::Assembly(format!("scene {}: {e}", scene.scene_id)))?;
        let full = if config.input_variant == InputVariant::XyzFullAttrs {
            Some(FullAttributes::from_scene(scene, &idx, norm.radius)?)
        } else {
            None
        };
        Ok(Self {
            scene_id: scene.scene_id.clone(),
            positions: idx.iter().map(|&i| centers[i]).collect(),
            colors: idx.iter().map(|&i| scene.colors[i]).collect(),
            full,
            cameras: normalize_cameras(&scene.cameras, &norm),
        })
    }

    /// Candidate cameras for one epoch.
    pub fn candidate_views(&self, config: &ModelConfig, epoch_seed: u64) -> Vec<CameraView> {
        let seed = derive_seed(epoch_seed, &["views", &self.scene_id]);
        match config.probe_sampling {
            ProbeSampling::Binned => select_candidate_views(&self.cameras, config.candidate_views, seed),
            ProbeSampling::Random => select_random_views(&self.cameras, config.candidate_views, seed),
        }
    }

    pub fn sample(
        &self,
        target: f64,
        variant: LabelVariant,
        config: &ModelConfig,
        epoch_seed: u64,
    ) -> Result<SceneSample, TrainError> {
        if !(0.0..=1.0).contains(&target) {
            return Err(TrainError::Assembly(format!("scene {}: target {target} outside [0, 1]", self.scene_id)));
        }
        let n = config.n_points;
        let valid = self.positions.len();
        let feats = featurize_primitives(&self.positions, &self.colors, config.input_variant, self.full.as_ref())?;
        let mut features = Tensor::zeros(n, feats.cols);
        features.data[..feats.data.len()].copy_from_slice(&feats.data);
        let mut positions = self.positions.clone();
        positions.resize(n, [0.0; 3]);
        Ok(SceneSample {
            scene_id: self.scene_id.clone(),
            features,
            positions,
            mask: (0..n).map(|i| i < valid).collect(),
            cameras: self.candidate_views(config, epoch_seed),
            target,
            label_variant: variant,
        })
    }
}

/// Builds the model input for `scene`, failing when it has no label.
pub fn assemble_sample(
    scene: &GaussianScene,
    label: Option<&SceneLabel>,
    config: &ModelConfig,
    epoch_seed: u64,
) -> Result<SceneSample, TrainError> {
    let label = label.ok_or_else(|| TrainError::MissingLabel(vec![scene.scene_id.clone()]))?;
    PreparedScene::new(scene, config)?.sample(label.value, label.variant, config, epoch_seed)
}

/// Label-stratified holdout split.
///
/// Scenes are sorted by label and cut into five equal-count bins; each bin
/// contributes its share of `round(test_fraction · n)` test scenes, the
/// leftover quota going to the bins with the largest remainders. Both
/// returned lists are sorted.
pub fn make_split(ids: &[String], labels: &[f64], test_fraction: f64, seed: u64) -> (Vec<String>, Vec<String>) {
    assert_eq!(ids.len(), labels.len());
    assert!((0.0..=1.0).contains(&test_fraction));
    const BINS: usize = 5;
    let n = ids.len();
    let n_test = (test_fraction * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["split"]));
    let mut test_idx: Vec<usize>;
    if n < BINS {
        log::warn!("only {n} scenes; falling back to an unstratified split");
        test_idx = (0..n).collect();
        test_idx.shuffle(&mut rng);
        test_idx.truncate(n_test);
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| labels[a].total_cmp(&labels[b]).then_with(|| ids[a].cmp(&ids[b])));
        let bins: Vec<&[usize]> = (0..BINS).map(|b| &order[b * n / BINS..(b + 1) * n / BINS]).collect();
        let exact: Vec<f64> = bins.iter().map(|bin| bin.len() as f64 * n_test as f64 / n as f64).collect();
        let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
        let mut by_remainder: Vec<usize> = (0..BINS).collect();
        by_remainder.shuffle(&mut rng);
        by_remainder.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
        let assigned: usize = quota.iter().sum();
        for &b in by_remainder.iter().take(n_test - assigned) {
            quota[b] += 1;
        }
        test_idx = Vec::with_capacity(n_test);
        for (bin, q) in bins.iter().zip(quota) {
            let mut members = bin.to_vec();
            members.shuffle(&mut rng);
            test_idx.extend_from_slice(&members[..q]);
        }
    }
    let mut is_test = vec![false; n];
    for i in test_idx {
        is_test[i] = true;
    }
    let mut train: Vec<String> = (0..n).filter(|&i| !is_test[i]).map(|i| ids[i].clone()).collect();
    let mut test: Vec<String> = (0..n).filter(|&i| is_test[i]).map(|i| ids[i].clone()).collect();
    train.sort();
    test.sort();
    (train, test)
}

/// Splits every source group separately and merges the results.
pub fn make_split_by_source(
    ids: &[String],
    labels: &[f64],
    sources: &[String],
    test_fraction: f64,
    seed: u64,
) -> (Vec<String>, Vec<String>) {
    assert_eq!(ids.len(), sources.len());
    let mut groups: BTreeMap<&str, (Vec<String>, Vec<f64>)> = BTreeMap::new();
    for ((id, &y), src) in ids.iter().zip(labels).zip(sources) {
        let g = groups.entry(src.as_str()).or_default();
        g.0.push(id.clone());
        g.1.push(y);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (src, (gi, gl)) in groups {
        let (a, b) = make_split(&gi, &gl, test_fraction, derive_seed(seed, &["source", src]));
        train.extend(a);
        test.extend(b);
    }
    train.sort();
    test.sort();
    (train, test)
}
