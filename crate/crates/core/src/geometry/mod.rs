//! Subsampling, normalization, candidate-view selection and projection.

pub mod normalize;
pub mod projection;
pub mod sampling;
pub mod views;

use thiserror::Error;

pub use normalize::{normalize_cameras, normalize_points, normalize_scene, SceneNormalization, RADIUS_FLOOR};
pub use projection::{assign_to_grid, project_point, ProjectedPoint, DEPTH_EPS};
pub use sampling::fps_subsample;
pub use views::{direction_bin, look_at_camera, look_at_target, select_candidate_views, select_random_views};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("domain error: {0}")]
    Domain(String),
}
