//! The scene aesthetic network and the differentiable machinery under it.

pub mod config;
pub mod features;
pub mod graph;
pub mod layers;
pub mod net;
pub mod params;
pub mod sample;
pub mod selection;
pub mod tensor;

use thiserror::Error;

pub use config::{CellPool, InputVariant, ModelConfig, PatchPool, ProbeSampling, SelectionMode};
pub use features::{featurize_primitives, unit_direction, FullAttributes, FULL_ATTR_DIM};
pub use graph::{CellReduce, Graph, Var};
pub use layers::Ctx;
pub use net::{count_parameters, regressor_dims, view_geometry_input, Aes3dNet, EncodedScene, Trace, ViewDescriptor};
pub use params::{Init, ParamGrads, ParamId, ParamStore};
pub use sample::SceneSample;
pub use selection::{topk_set, topk_weights, uniform_weights};
pub use tensor::Tensor;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("domain error: {0}")]
    Domain(String),
}
