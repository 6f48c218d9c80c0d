#![allow(dead_code)]

pub mod metric_oracle;
pub mod oracle;

use std::collections::BTreeMap;

use aes3d_core::annotation::LabelVariant;
use aes3d_core::model::{ModelConfig, SceneSample};
use aes3d_core::synth::{generate_dataset, generate_scene, SynthConfig};
use aes3d_core::training::PreparedScene;

pub fn tiny_samples(config: &ModelConfig, count: usize, seed: u64) -> Vec<SceneSample> {
    let synth = SynthConfig { scenes: count, points: 48, cameras: 8, seed };
    (0..count)
        .map(|i| {
            let s = generate_scene(&synth, i);
            PreparedScene::new(&s.scene, config).unwrap().sample(s.score, LabelVariant::Attr8, config, 5).unwrap()
        })
        .collect()
}

pub struct SynthSet {
    pub scenes: Vec<PreparedScene>,
    pub labels: BTreeMap<String, f64>,
    pub ids: Vec<String>,
    pub scores: Vec<f64>,
}

pub fn synth_set(synth: &SynthConfig, model: &ModelConfig) -> SynthSet {
    let data = generate_dataset(synth);
    SynthSet {
        scenes: data.iter().map(|s| PreparedScene::new(&s.scene, model).unwrap()).collect(),
        labels: data.iter().map(|s| (s.scene.scene_id.clone(), s.score)).collect(),
        ids: data.iter().map(|s| s.scene.scene_id.clone()).collect(),
        scores: data.iter().map(|s| s.score).collect(),
    }
}
