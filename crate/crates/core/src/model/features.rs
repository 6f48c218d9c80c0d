use super::{InputVariant, ModelError, Tensor};
use crate::ingest::{GaussianScene, Vec3, SH_REST_LEN};

/// xyz, raw DC, padded higher-order SH, opacity, log-scales, quaternion.
pub const FULL_ATTR_DIM: usize = 3 + 3 + SH_REST_LEN + 1 + 3 + 4;

/// Raw Gaussian attributes aligned with a subsampled set of centers.
#[derive(Debug, Clone, PartialEq)]
pub struct FullAttributes {
    pub sh_dc: Vec<Vec3>,
    pub sh_rest: Vec<Vec<f64>>,
    pub opacity: Vec<f64>,
    /// Log-scales already expressed in normalized scene units.
    pub log_scales: Vec<Vec3>,
    pub rotations: Vec<[f64; 4]>,
}

impl FullAttributes {
    /// Gathers `indices` from `scene`, shifting log-scales by `−ln radius`.
    pub fn from_scene(scene: &GaussianScene, indices: &[usize], radius: f64) -> Result<Self, ModelError> {
        let missing = || ModelError::Config(format!("scene {} lacks full Gaussian attributes", scene.scene_id));
        let sh_dc = scene.sh_dc.as_ref().ok_or_else(missing)?;
        let opacity = scene.opacity.as_ref().ok_or_else(missing)?;
        let scales = scene.scales.as_ref().ok_or_else(missing)?;
        let rotations = scene.rotations.as_ref().ok_or_else(missing)?;
        let shift = radius.ln();
        let rest = |i: usize| -> Result<Vec<f64>, ModelError> {
            let coeffs = scene.sh_rest.as_ref().map(|r| r[i].clone()).unwrap_or_default();
            if coeffs.len() > SH_REST_LEN {
                return Err(ModelError::Config(format!(
                    "scene {} stores {} higher-order SH coefficients, at most {SH_REST_LEN} supported",
                    scene.scene_id,
                    coeffs.len()
                )));
            }
            Ok(coeffs)
        };
        Ok(Self {
            sh_dc: indices.iter().map(|&i| sh_dc[i]).collect(),
            sh_rest: indices.iter().map(|&i| rest(i)).collect::<Result<_, _>>()?,
            opacity: indices.iter().map(|&i| opacity[i]).collect(),
            log_scales: indices.iter().map(|&i| scales[i].map(|s| s - shift)).collect(),
            rotations: indices.iter().map(|&i| rotations[i]).collect(),
        })
    }
}

/// `p / ‖p‖`, or zero at the origin.
pub fn unit_direction(p: &Vec3) -> Vec3 {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    if n == 0.0 {
        [0.0; 3]
    } else {
        p.map(|c| c / n)
    }
}

/// Per-primitive input features for `variant`, one row per center.
pub fn featurize_primitives(
    centers: &[Vec3],
    colors: &[Vec3],
    variant: InputVariant,
    full: Option<&FullAttributes>,
) -> Result<Tensor, ModelError> {
    let n = centers.len();
    if colors.len() != n {
        return Err(ModelError::Config(format!("{n} centers but {} colors", colors.len())));
    }
    let mut rows = Vec::with_capacity(n);
    for (i, (p, c)) in centers.iter().zip(colors).enumerate() {
        let mut row: Vec<f64> = p.to_vec();
        match variant {
            InputVariant::Xyz => {}
            InputVariant::XyzRgb => row.extend_from_slice(c),
            InputVariant::XyzRgbDir => {
                row.extend_from_slice(c);
                row.extend_from_slice(&unit_direction(p));
            }
            InputVariant::XyzFullAttrs => {
                let f = full.ok_or_else(|| {
                    ModelError::Config("input variant xyz_full_attrs needs the full Gaussian attributes".into())
                })?;
                if f.sh_dc.len() != n {
                    return Err(ModelError::Config("full attributes not aligned with centers".into()));
                }
                row.extend_from_slice(&f.sh_dc[i]);
                let rest = &f.sh_rest[i];
                row.extend_from_slice(rest);
                row.extend(std::iter::repeat_n(0.0, SH_REST_LEN - rest.len()));
                row.push(f.opacity[i]);
                row.extend_from_slice(&f.log_scales[i]);
                row.extend_from_slice(&f.rotations[i]);
            }
        }
        rows.push(row);
    }
    let width = match variant {
        InputVariant::Xyz => 3,
        InputVariant::XyzRgb => 6,
        InputVariant::XyzRgbDir => 9,
        InputVariant::XyzFullAttrs => FULL_ATTR_DIM,
    };
    let mut data = Vec::with_capacity(n * width);
    for r in rows {
        debug_assert_eq!(r.len(), width);
        data.extend(r);
    }
    Ok(Tensor::from_vec(n, width, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_variant_example() {
        let f = featurize_primitives(&[[1.0, 0.0, 0.0]], &[[0.2, 0.4, 0.6]], InputVariant::XyzRgbDir, None).unwrap();
        assert_eq!(f.data, vec![1.0, 0.0, 0.0, 0.2, 0.4, 0.6, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn origin_has_zero_direction() {
        let f = featurize_primitives(&[[0.0; 3]], &[[0.5; 3]], InputVariant::XyzRgbDir, None).unwrap();
        assert_eq!(&f.data[6..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn variant_widths() {
        let p = [[0.3, -0.4, 1.2]];
        let c = [[0.1, 0.2, 0.3]];
        assert_eq!(featurize_primitives(&p, &c, InputVariant::Xyz, None).unwrap().data, vec![0.3, -0.4, 1.2]);
        assert_eq!(featurize_primitives(&p, &c, InputVariant::XyzRgb, None).unwrap().cols, 6);
        assert!(featurize_primitives(&p, &c, InputVariant::XyzFullAttrs, None).is_err());
    }

    #[test]
    fn full_attributes_layout() {
        let mut scene = GaussianScene::from_points("s", vec![[0.0; 3], [1.0, 1.0, 1.0]], vec![[0.5; 3]; 2]);
        scene.sh_dc = Some(vec![[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]]);
        scene.opacity = Some(vec![0.7, -0.2]);
        scene.scales = Some(vec![[0.0; 3], [1.0, 2.0, 3.0]]);
        scene.rotations = Some(vec![[1.0, 0.0, 0.0, 0.0]; 2]);
        scene.sh_rest = Some(vec![vec![9.0; 9], vec![8.0; 9]]);
        let full = FullAttributes::from_scene(&scene, &[1], std::f64::consts::E).unwrap();
        let f = featurize_primitives(&[[0.5; 3]], &[[0.5; 3]], InputVariant::XyzFullAttrs, Some(&full)).unwrap();
        assert_eq!(f.cols, 59);
        let row = f.row(0);
        assert_eq!(&row[3..6], &[0.4, 0.5, 0.6]);
        assert_eq!(&row[6..15], &[8.0; 9]);
        assert!(row[15..51].iter().all(|&v| v == 0.0));
        assert_eq!(row[51], -0.2);
        assert_eq!(&row[52..55], &[0.0, 1.0, 2.0]);
        assert_eq!(&row[55..59], &[1.0, 0.0, 0.0, 0.0]);
    }
}
