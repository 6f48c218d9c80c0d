//! Loading 3D Gaussian Splatting scenes and their calibrated cameras.

pub mod camera;
pub mod ply;

use std::path::Path;

use thiserror::Error;

pub use camera::{load_camera_manifest, parse_camera_manifest, CameraManifest, CameraRecord, CameraView, Mat3, Vec3};
pub use ply::{parse_gaussian_ply, write_gaussian_ply, SH_REST_LEN};

/// The ℓ = 0 real spherical-harmonic basis constant, `1 / (2√π)`.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;

/// Quaternion norm tolerance for stored rotations.
pub const QUAT_NORM_TOL: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed PLY header at line {line}: {message}")]
    Header { line: usize, message: String },
    #[error("PLY body truncated: header declares {declared} vertices but the body holds {available}")]
    Truncated { declared: usize, available: usize },
    #[error("PLY schema error: {0}")]
    Schema(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("camera {view_id} failed validation: {message}")]
    CameraValidation { view_id: String, message: String },
    #[error("duplicate view_id {view_id} in scene {scene_id}")]
    DuplicateView { scene_id: String, view_id: String },
    #[error("camera manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parsed Gaussian primitives plus the cameras that observed them.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianScene {
    pub scene_id: String,
    pub centers: Vec<Vec3>,
    /// RGB in `[0, 1]`.
    pub colors: Vec<Vec3>,
    /// Raw SH DC coefficients, absent when the file stored direct colors.
    pub sh_dc: Option<Vec<Vec3>>,
    pub opacity: Option<Vec<f64>>,
    pub scales: Option<Vec<Vec3>>,
    /// Unit quaternions (w, x, y, z as stored).
    pub rotations: Option<Vec<[f64; 4]>>,
    /// Higher-order SH coefficients, stored untouched.
    pub sh_rest: Option<Vec<Vec<f64>>>,
    pub cameras: Vec<CameraView>,
}

impl GaussianScene {
    /// A scene from centers and colors only.
    pub fn from_points(scene_id: impl Into<String>, centers: Vec<Vec3>, colors: Vec<Vec3>) -> Self {
        Self {
            scene_id: scene_id.into(),
            centers,
            colors,
            sh_dc: None,
            opacity: None,
            scales: None,
            rotations: None,
            sh_rest: None,
            cameras: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn has_full_attributes(&self) -> bool {
        self.sh_dc.is_some() && self.opacity.is_some() && self.scales.is_some() && self.rotations.is_some()
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let n = self.centers.len();
        if n == 0 {
            return Err(IngestError::Schema("scene has no primitives".into()));
        }
        let check_len = |name: &str, len: Option<usize>| match len {
            Some(l) if l != n => Err(IngestError::Schema(format!("{name} has {l} entries, expected {n}"))),
            _ => Ok(()),
        };
        check_len("colors", Some(self.colors.len()))?;
        check_len("sh_dc", self.sh_dc.as_ref().map(Vec::len))?;
        check_len("opacity", self.opacity.as_ref().map(Vec::len))?;
        check_len("scales", self.scales.as_ref().map(Vec::len))?;
        check_len("rotations", self.rotations.as_ref().map(Vec::len))?;
        check_len("sh_rest", self.sh_rest.as_ref().map(Vec::len))?;
        if let Some(i) = self.colors.iter().position(|c| c.iter().any(|v| !(0.0..=1.0).contains(v))) {
            return Err(IngestError::Domain(format!("color of primitive {i} outside [0, 1]")));
        }
        if let Some(rots) = &self.rotations {
            for (i, q) in rots.iter().enumerate() {
                let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > QUAT_NORM_TOL {
                    return Err(IngestError::Domain(format!("rotation of primitive {i} has norm {norm}")));
                }
            }
        }
        for cam in &self.cameras {
            cam.validate()?;
        }
        Ok(())
    }
}

/// `clamp(0.5 + C0 · dc, 0, 1)` per channel.
pub fn sh_dc_to_rgb(dc: Vec3) -> Result<Vec3, IngestError> {
    if dc.iter().any(|v| !v.is_finite()) {
        return Err(IngestError::Domain(format!("non-finite SH DC coefficient {dc:?}")));
    }
    Ok(dc.map(|c| (0.5 + SH_C0 * c).clamp(0.0, 1.0)))
}

/// Inverse of [`sh_dc_to_rgb`] on the unclamped range.
pub fn rgb_to_sh_dc(rgb: Vec3) -> Vec3 {
    rgb.map(|c| (c - 0.5) / SH_C0)
}

/// Reads `<path>` as a PLY; the scene id is the file stem.
pub fn load_scene_file(path: &Path) -> Result<GaussianScene, IngestError> {
    let bytes = std::fs::read(path)?;
    let scene_id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scene");
    parse_gaussian_ply(scene_id, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dc_examples() {
        assert_eq!(sh_dc_to_rgb([0.0, 0.0, 0.0]).unwrap(), [0.5, 0.5, 0.5]);
        let sat = sh_dc_to_rgb([1.772453851, 0.0, 0.0]).unwrap();
        assert!((sat[0] - 1.0).abs() < 1e-9 && sat[1] == 0.5);
        assert_eq!(sh_dc_to_rgb([-10.0, 0.0, 0.0]).unwrap(), [0.0, 0.5, 0.5]);
        assert!(sh_dc_to_rgb([f64::NAN, 0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn dc_is_monotone_and_clamp_idempotent(a in -20.0f64..20.0, b in -20.0f64..20.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let rl = sh_dc_to_rgb([lo; 3]).unwrap();
            let rh = sh_dc_to_rgb([hi; 3]).unwrap();
            prop_assert!(rl[0] <= rh[0]);
            let again = rl.map(|c| c.clamp(0.0, 1.0));
            prop_assert_eq!(again, rl);
        }
    }

    #[test]
    fn validate_rejects_mismatched_lengths() {
        let mut s = GaussianScene::from_points("s", vec![[0.0; 3]; 2], vec![[0.5; 3]; 2]);
        s.validate().unwrap();
        s.opacity = Some(vec![0.0]);
        assert!(s.validate().is_err());
        s.opacity = None;
        s.rotations = Some(vec![[2.0, 0.0, 0.0, 0.0]; 2]);
        assert!(s.validate().is_err());
    }
}
