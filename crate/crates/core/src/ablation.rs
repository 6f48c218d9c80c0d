//! Named ablation presets, each a set of overrides on a full-model config.

use crate::model::{CellPool, InputVariant, PatchPool, ProbeSampling, SelectionMode};
use crate::training::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Change {
    NoSceneToken,
    NoControlTokens,
    Selection(SelectionMode),
    TopK(usize),
    RankWeight(f64),
    NoPatchTransformer,
    Grid(usize),
    CellPool(CellPool),
    PatchPool(PatchPool),
    Input(InputVariant),
    Probes(ProbeSampling),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    changes: &'static [Change],
}

impl Preset {
    /// `base` with this preset's overrides applied.
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        let mut c = base.clone();
        for change in self.changes {
            let m = &mut c.model;
            match *change {
                Change::NoSceneToken => m.use_scene_global_token = false,
                Change::NoControlTokens => m.use_control_tokens = false,
                Change::Selection(s) => m.selection_mode = s,
                Change::TopK(k) => m.top_k = k,
                Change::RankWeight(w) => c.loss.rank_weight = w,
                Change::NoPatchTransformer => m.view_transformer_blocks = 0,
                Change::Grid(g) => m.grid_side = g,
                Change::CellPool(p) => m.cell_pool = p,
                Change::PatchPool(p) => m.patch_pool = p,
                Change::Input(v) => m.input_variant = v,
                Change::Probes(p) => m.probe_sampling = p,
            }
        }
        c
    }
}

const fn preset(name: &'static str, description: &'static str, changes: &'static [Change]) -> Preset {
    Preset { name, description, changes }
}

pub const PRESETS: &[Preset] = &[
    preset("A1_no_scene_global", "fusion without the scene-global token", &[Change::NoSceneToken]),
    preset("A2_full", "full model", &[]),
    preset("B1_no_control_tokens", "selector without learnable control tokens", &[Change::NoControlTokens]),
    preset("B2_uniform", "uniform weights over every view, no selector", &[Change::Selection(SelectionMode::Uniform)]),
    preset("B3_full", "full model", &[]),
    preset("C1_k8", "top-8 views", &[Change::TopK(8)]),
    preset("C2_k16", "top-16 views", &[Change::TopK(16)]),
    preset("C3_k32", "top-32 views", &[Change::TopK(32)]),
    preset("D1_rank0", "no ranking loss", &[Change::RankWeight(0.0)]),
    preset("D2_rank0.1", "ranking weight 0.1", &[Change::RankWeight(0.1)]),
    preset("D3_rank0.5", "ranking weight 0.5", &[Change::RankWeight(0.5)]),
    preset(
        "E1_no_projection",
        "regress from the scene token, no view tokenization",
        &[Change::Selection(SelectionMode::NoneProjection)],
    ),
    preset("E2_full", "full model", &[]),
    preset("T3_no_patch_transformer", "view descriptors without the patch transformer", &[Change::NoPatchTransformer]),
    preset("T3_grid7", "7x7 projection grid", &[Change::Grid(7)]),
    preset("T3_mean_only_scatter", "mean-only cell pooling", &[Change::CellPool(CellPool::Mean)]),
    preset("T3_mean_patch_pooling", "mean over occupied patches", &[Change::PatchPool(PatchPool::Mean)]),
    preset("T3_xyz", "positions only", &[Change::Input(InputVariant::Xyz)]),
    preset("T3_xyz_rgb", "positions and colors", &[Change::Input(InputVariant::XyzRgb)]),
    preset("T3_xyz_full_attrs", "positions and raw Gaussian attributes", &[Change::Input(InputVariant::XyzFullAttrs)]),
    preset(
        "T3_selected_uniform",
        "learned top-K set, uniform weights inside it",
        &[Change::Selection(SelectionMode::SelectedUniform)],
    ),
    preset("T3_random_probes", "uniformly random candidate views", &[Change::Probes(ProbeSampling::Random)]),
];

pub fn find_preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.name)
}
