//! Scene discovery, the scene index and label files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use aes3d_core::annotation::{LabelFile, LabelVariant};
use aes3d_core::ingest::{load_camera_manifest, load_scene_file, CameraManifest, GaussianScene};
use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::config::{require, Effective};
use crate::{Invalid, Meta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub file: PathBuf,
    pub primitives: usize,
    pub cameras: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneError {
    pub file: PathBuf,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneIndex {
    pub meta: Meta,
    pub scenes: BTreeMap<String, IndexEntry>,
    pub errors: Vec<SceneError>,
}

/// Loads one PLY and attaches its cameras from the manifest.
fn load_one(path: &Path, manifest: &CameraManifest) -> anyhow::Result<GaussianScene> {
    let mut scene = load_scene_file(path)?;
    scene.cameras = manifest
        .get(&scene.scene_id)
        .cloned()
        .with_context(|| format!("no cameras for scene {} in the manifest", scene.scene_id))?;
    scene.validate()?;
    Ok(scene)
}

type Scanned = (Vec<(PathBuf, GaussianScene)>, Vec<SceneError>);

/// Every `*.ply` under `dir`, loaded independently; failures are collected.
pub fn scan(dir: &Path, manifest: &CameraManifest) -> anyhow::Result<Scanned> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("ply")))
        .collect();
    files.sort();
    let mut ok = Vec::new();
    let mut errors = Vec::new();
    for file in files {
        match load_one(&file, manifest) {
            Ok(scene) => ok.push((file, scene)),
            Err(e) => {
                log::warn!("{}: {e:#}", file.display());
                errors.push(SceneError { file, error: format!("{e:#}") });
            }
        }
    }
    Ok((ok, errors))
}

pub fn manifest(eff: &Effective) -> anyhow::Result<CameraManifest> {
    let path = require(&eff.run.paths.camera_manifest, "camera manifest", "--cameras")?;
    load_camera_manifest(path).map_err(|e| Invalid(format!("{}: {e}", path.display())).into())
}

/// Scenes named by the index when one is configured, else every scene in the scene directory.
pub fn load_scenes(eff: &Effective) -> anyhow::Result<Vec<GaussianScene>> {
    let manifest = manifest(eff)?;
    let scenes = if let Some(path) = &eff.run.paths.index {
        let index: SceneIndex = read_json(path)?;
        index
            .scenes
            .values()
            .map(|e| load_one(&e.file, &manifest).with_context(|| format!("indexed scene {}", e.file.display())))
            .collect::<anyhow::Result<Vec<_>>>()?
    } else {
        let dir = require(&eff.run.paths.scene_dir, "scene directory or index", "--scene-dir/--index")?;
        scan(dir, &manifest)?.0.into_iter().map(|(_, s)| s).collect()
    };
    if scenes.is_empty() {
        return Err(Invalid("no valid scenes".into()).into());
    }
    Ok(scenes)
}

pub fn load_labels(eff: &Effective) -> anyhow::Result<BTreeMap<String, f64>> {
    let path = require(&eff.run.paths.labels, "label file", "--labels")?;
    let file: LabelFile = read_json(path)?;
    let variant: LabelVariant = eff.run.label_variant;
    Ok(file.into_iter().map(|(id, e)| (id, e.get(variant))).collect())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| Invalid(format!("{}: {e}", path.display())).into())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
