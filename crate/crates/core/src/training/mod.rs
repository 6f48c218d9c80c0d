//! Sample assembly, splitting, optimization and checkpointing.

pub mod checkpoint;
pub mod data;
pub mod gradcheck;
pub mod optim;
pub mod trainer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelConfig, ModelError};
use crate::objectives::LossConfig;

pub use checkpoint::{Checkpoint, RngState, CHECKPOINT_FORMAT_VERSION};
pub use data::{assemble_sample, make_split, make_split_by_source, PreparedScene};
pub use gradcheck::{grad_check, GradCheckFailure, GradCheckReport};
pub use optim::{clip_grad_norm, cosine_multiplier, AdamW};
pub use trainer::{batch_loss_and_grads, evaluate, train, EpochLog, TrainOutcome};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no label for scenes {0:?}")]
    MissingLabel(Vec<String>),
    #[error("assembly failed: {0}")]
    Assembly(String),
    #[error("non-finite loss in batch {0:?}")]
    NonFinite(Vec<String>),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub schedule: Schedule,
    pub grad_clip_norm: f64,
    pub seed: u64,
    pub loss: LossConfig,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 16,
            learning_rate: 5e-5,
            weight_decay: 1e-4,
            batch_size: 4,
            schedule: Schedule::Cosine,
            grad_clip_norm: 1.0,
            seed: 42,
            loss: LossConfig::default(),
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        for (name, v) in [("learning_rate", self.learning_rate), ("weight_decay", self.weight_decay)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(self.grad_clip_norm > 0.0) {
            return bad(format!("grad_clip_norm must be positive, got {}", self.grad_clip_norm));
        }
        self.loss.validate().map_err(TrainError::Config)?;
        self.model.validate()?;
        Ok(())
    }

    pub fn hash(&self) -> String {
        crate::util::config_hash(self)
    }
}
