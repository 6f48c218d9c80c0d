use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamW, TrainConfig, TrainError};
use crate::model::{Aes3dNet, ModelConfig, Tensor};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    /// First epoch not yet consumed.
    pub next_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: BTreeMap<String, Tensor>,
    pub v: BTreeMap<String, Tensor>,
    pub step: u64,
}

/// A model snapshot plus everything needed to account for how it was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub params: BTreeMap<String, Tensor>,
    pub optimizer: OptimizerState,
    pub rng: RngState,
    pub epoch: usize,
    pub config_hash: String,
}

impl Checkpoint {
    pub fn capture(net: &Aes3dNet, opt: &AdamW, config: &TrainConfig, epoch: usize) -> Self {
        let names: Vec<String> = net.params.iter().map(|(n, _)| n.to_string()).collect();
        let zip = |ts: &[Tensor]| names.iter().cloned().zip(ts.iter().cloned()).collect();
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            model: net.config.clone(),
            train: config.clone(),
            params: net.params.to_named_map(),
            optimizer: OptimizerState { m: zip(&opt.m), v: zip(&opt.v), step: opt.step },
            rng: RngState { seed: config.seed, next_epoch: epoch },
            epoch,
            config_hash: config.hash(),
        }
    }

    /// Rebuilds the network, rejecting any config or shape mismatch.
    pub fn restore(&self) -> Result<Aes3dNet, TrainError> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(TrainError::Checkpoint(format!("unsupported format version {}", self.format_version)));
        }
        if self.model != self.train.model {
            return Err(TrainError::Checkpoint("model config differs from the training config's model".into()));
        }
        let expected = self.train.hash();
        if expected != self.config_hash {
            return Err(TrainError::Checkpoint(format!(
                "config hash mismatch: stored {} but config hashes to {expected}",
                self.config_hash
            )));
        }
        let mut net = Aes3dNet::new(self.model.clone(), 0)?;
        net.params.load_named_map(&self.params).map_err(TrainError::Checkpoint)?;
        Ok(net)
    }

    pub fn restore_optimizer(&self, net: &Aes3dNet) -> Result<AdamW, TrainError> {
        let pick = |map: &BTreeMap<String, Tensor>| -> Result<Vec<Tensor>, TrainError> {
            net.params
                .iter()
                .map(|(name, t)| match map.get(name) {
                    Some(s) if s.shape() == t.shape() => Ok(s.clone()),
                    _ => Err(TrainError::Checkpoint(format!("optimizer state for {name} missing or misshapen"))),
                })
                .collect()
        };
        Ok(AdamW { m: pick(&self.optimizer.m)?, v: pick(&self.optimizer.v)?, step: self.optimizer.step })
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self).map_err(|e| TrainError::Checkpoint(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        serde_json::from_reader(file).map_err(|e| TrainError::Checkpoint(format!("{}: {e}", path.display())))
    }
}
