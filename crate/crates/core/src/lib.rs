//! Scene-level aesthetic regression on 3D Gaussian Splatting primitives.

pub mod ablation;
pub mod annotation;
pub mod evaluation;
pub mod geometry;
pub mod ingest;
pub mod model;
pub mod objectives;
pub mod synth;
pub mod training;
pub mod util;
