use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputVariant {
    Xyz,
    XyzRgb,
    #[default]
    XyzRgbDir,
    XyzFullAttrs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    #[default]
    Learned,
    Uniform,
    SelectedUniform,
    NoneProjection,
}

/// How patch tokens are pooled into one view descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PatchPool {
    #[default]
    Attention,
    /// Mean over occupied cells.
    Mean,
}

/// How scene tokens landing in one cell are summarized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CellPool {
    #[default]
    MeanMax,
    Mean,
}

/// How candidate cameras are drawn from the available ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProbeSampling {
    #[default]
    Binned,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_points: usize,
    pub hidden_dim: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    pub dropout: f64,
    pub encoder_blocks: usize,
    pub view_transformer_blocks: usize,
    pub selector_blocks: usize,
    pub control_tokens: usize,
    pub grid_side: usize,
    pub candidate_views: usize,
    pub top_k: usize,
    pub temperature: f64,
    pub regressor_layers: usize,
    pub input_variant: InputVariant,
    pub use_scene_global_token: bool,
    pub use_control_tokens: bool,
    pub selection_mode: SelectionMode,
    pub cell_pool: CellPool,
    pub patch_pool: PatchPool,
    pub probe_sampling: ProbeSampling,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_points: 2048,
            hidden_dim: 192,
            heads: 4,
            mlp_ratio: 2,
            dropout: 0.1,
            encoder_blocks: 4,
            view_transformer_blocks: 2,
            selector_blocks: 2,
            control_tokens: 2,
            grid_side: 14,
            candidate_views: 32,
            top_k: 8,
            temperature: 1.0,
            regressor_layers: 3,
            input_variant: InputVariant::XyzRgbDir,
            use_scene_global_token: true,
            use_control_tokens: true,
            selection_mode: SelectionMode::Learned,
            cell_pool: CellPool::MeanMax,
            patch_pool: PatchPool::Attention,
            probe_sampling: ProbeSampling::Binned,
        }
    }
}

impl ModelConfig {
    /// The smallest configuration used by gradient checks.
    pub fn tiny() -> Self {
        Self {
            n_points: 32,
            hidden_dim: 8,
            heads: 2,
            encoder_blocks: 1,
            view_transformer_blocks: 1,
            selector_blocks: 1,
            grid_side: 4,
            candidate_views: 4,
            top_k: 2,
            ..Self::default()
        }
    }

    /// A desk-scale model for end-to-end runs on a laptop CPU.
    pub fn desk() -> Self {
        Self {
            n_points: 256,
            hidden_dim: 32,
            heads: 4,
            encoder_blocks: 2,
            view_transformer_blocks: 1,
            selector_blocks: 1,
            grid_side: 8,
            candidate_views: 8,
            top_k: 4,
            ..Self::default()
        }
    }

    /// Input feature width per primitive.
    pub fn feature_dim(&self) -> usize {
        match self.input_variant {
            InputVariant::Xyz => 3,
            InputVariant::XyzRgb => 6,
            InputVariant::XyzRgbDir => 9,
            InputVariant::XyzFullAttrs => super::features::FULL_ATTR_DIM,
        }
    }

    /// Scene-token path feeding the selector sequence.
    pub fn uses_selector(&self) -> bool {
        matches!(self.selection_mode, SelectionMode::Learned | SelectionMode::SelectedUniform)
    }

    pub fn uses_views(&self) -> bool {
        self.selection_mode != SelectionMode::NoneProjection
    }

    /// Whether the pooled scene token `s` is consumed anywhere.
    pub fn uses_scene_token(&self) -> bool {
        !self.uses_views() || (self.uses_selector() && self.use_scene_global_token)
    }

    pub fn active_control_tokens(&self) -> usize {
        if self.use_control_tokens {
            self.control_tokens
        } else {
            0
        }
    }

    /// Length of the selector input sequence.
    pub fn selector_sequence_len(&self) -> usize {
        usize::from(self.use_scene_global_token) + self.active_control_tokens() + self.candidate_views
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        let counts = [
            ("n_points", self.n_points),
            ("hidden_dim", self.hidden_dim),
            ("heads", self.heads),
            ("mlp_ratio", self.mlp_ratio),
            ("grid_side", self.grid_side),
            ("candidate_views", self.candidate_views),
            ("top_k", self.top_k),
            ("regressor_layers", self.regressor_layers),
        ];
        for (name, v) in counts {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.use_control_tokens && self.control_tokens == 0 {
            return bad("control_tokens must be at least 1 when enabled".into());
        }
        if self.hidden_dim % self.heads != 0 {
            return bad(format!("hidden_dim {} not divisible by heads {}", self.hidden_dim, self.heads));
        }
        if self.hidden_dim < 2 {
            return bad("hidden_dim must be at least 2".into());
        }
        if self.top_k > self.candidate_views {
            return bad(format!("top_k {} exceeds candidate_views {}", self.top_k, self.candidate_views));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }
}
