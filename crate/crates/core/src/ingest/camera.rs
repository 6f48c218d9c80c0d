//! Calibrated pinhole cameras and the newline-delimited JSON camera manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Maximum entry of `|RᵀR − I|` accepted for a rotation.
pub const ORTHONORMAL_TOL: f64 = 1e-5;
/// Maximum disagreement between the stored and recomputed camera center.
pub const CENTER_TOL: f64 = 1e-6;

/// One calibrated camera: intrinsics in pixels and a world-to-camera pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraView {
    pub view_id: String,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
    /// World-to-camera rotation, row-major.
    pub rotation: Mat3,
    pub translation: Vec3,
    /// Camera center in world coordinates, `-Rᵀ t`.
    pub center: Vec3,
    /// `(fx / width, fy / height, cx / width, cy / height)`.
    pub normalized_intrinsics: [f64; 4],
}

impl CameraView {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        view_id: impl Into<String>,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: f64,
        height: f64,
        rotation: Mat3,
        translation: Vec3,
    ) -> Result<Self, IngestError> {
        let view_id = view_id.into();
        let invalid = |message: String| IngestError::CameraValidation { view_id: view_id.clone(), message };
        let scalars = [fx, fy, cx, cy, width, height];
        if scalars.iter().chain(rotation.iter().flatten()).chain(&translation).any(|v| !v.is_finite()) {
            return Err(invalid("non-finite camera parameter".into()));
        }
        if !(width > 0.0 && height > 0.0) {
            return Err(invalid(format!("image size must be positive, got {width}x{height}")));
        }
        if !(fx > 0.0 && fy > 0.0) {
            return Err(invalid(format!("focal lengths must be positive, got fx={fx} fy={fy}")));
        }
        let err = orthonormality_error(&rotation);
        if err > ORTHONORMAL_TOL {
            return Err(invalid(format!("rotation is not orthonormal (max |RᵀR - I| = {err:.3e})")));
        }
        Ok(Self {
            view_id,
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation,
            center: camera_center(&rotation, &translation),
            normalized_intrinsics: [fx / width, fy / height, cx / width, cy / height],
        })
    }

    /// Re-checks every invariant, including the stored center.
    pub fn validate(&self) -> Result<(), IngestError> {
        let rebuilt = Self::new(
            self.view_id.clone(),
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            self.rotation,
            self.translation,
        )?;
        let drift = (0..3).map(|i| (rebuilt.center[i] - self.center[i]).abs()).fold(0.0, f64::max);
        if drift > CENTER_TOL {
            return Err(IngestError::CameraValidation {
                view_id: self.view_id.clone(),
                message: format!("stored center disagrees with -Rᵀt by {drift:.3e}"),
            });
        }
        Ok(())
    }

    /// The same camera after the world is mapped by `p ↦ (p − shift) / scale`.
    ///
    /// Projections of transformed points through the returned camera equal
    /// the original projections.
    pub fn with_world_normalized(&self, shift: &Vec3, scale: f64) -> Self {
        let center = [
            (self.center[0] - shift[0]) / scale,
            (self.center[1] - shift[1]) / scale,
            (self.center[2] - shift[2]) / scale,
        ];
        let rc = mat_vec(&self.rotation, &center);
        let mut out = self.clone();
        out.translation = [-rc[0], -rc[1], -rc[2]];
        out.center = center;
        out
    }
}

pub fn camera_center(r: &Mat3, t: &Vec3) -> Vec3 {
    let mut o = [0.0; 3];
    for (i, oi) in o.iter_mut().enumerate() {
        *oi = -(r[0][i] * t[0] + r[1][i] * t[1] + r[2][i] * t[2]);
    }
    o
}

pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn orthonormality_error(r: &Mat3) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

/// One line of the camera manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub scene_id: String,
    pub view_id: String,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
    #[serde(rename = "R")]
    pub rotation: [f64; 9],
    pub t: [f64; 3],
}

impl CameraRecord {
    pub fn from_view(scene_id: &str, v: &CameraView) -> Self {
        let r = &v.rotation;
        Self {
            scene_id: scene_id.to_owned(),
            view_id: v.view_id.clone(),
            fx: v.fx,
            fy: v.fy,
            cx: v.cx,
            cy: v.cy,
            width: v.width,
            height: v.height,
            rotation: [r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2]],
            t: v.translation,
        }
    }

    pub fn to_view(&self) -> Result<CameraView, IngestError> {
        let m = &self.rotation;
        CameraView::new(
            self.view_id.clone(),
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            [[m[0], m[1], m[2]], [m[3], m[4], m[5]], [m[6], m[7], m[8]]],
            self.t,
        )
    }
}

/// Cameras grouped by scene, in manifest order within each scene.
pub type CameraManifest = BTreeMap<String, Vec<CameraView>>;

pub fn load_camera_manifest(path: &Path) -> Result<CameraManifest, IngestError> {
    let file = std::fs::File::open(path)?;
    parse_camera_manifest(std::io::BufReader::new(file))
}

pub fn parse_camera_manifest<R: BufRead>(reader: R) -> Result<CameraManifest, IngestError> {
    let mut manifest = CameraManifest::new();
    let mut seen: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CameraRecord = serde_json::from_str(&line)
            .map_err(|e| IngestError::Manifest { line: i + 1, message: e.to_string() })?;
        let view = record.to_view()?;
        if !seen.entry(record.scene_id.clone()).or_default().insert(record.view_id.clone()) {
            return Err(IngestError::DuplicateView { scene_id: record.scene_id, view_id: record.view_id });
        }
        manifest.entry(record.scene_id).or_default().push(view);
    }
    Ok(manifest)
}

pub fn write_camera_manifest<W: std::io::Write>(
    mut out: W,
    scenes: &BTreeMap<String, Vec<CameraView>>,
) -> std::io::Result<()> {
    for (scene_id, views) in scenes {
        for v in views {
            let line = serde_json::to_string(&CameraRecord::from_view(scene_id, v)).map_err(std::io::Error::other)?;
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}
