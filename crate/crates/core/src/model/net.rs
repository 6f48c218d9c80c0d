use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{CellPool, ModelConfig, PatchPool, SelectionMode};
use super::layers::{AttnPool, Builder, Ctx, LayerNorm, Linear, Mlp, Stack};
use super::sample::SceneSample;
use super::selection::{topk_set, uniform_weights};
use super::{CellReduce, Graph, Init, ModelError, ParamId, ParamStore, Tensor, Var};
use crate::geometry::{assign_to_grid, project_point};
use crate::ingest::CameraView;

/// Width of the per-camera geometric input.
pub const VIEW_GEOMETRY_DIM: usize = 16;

/// Output widths of the scalar head, starting from `d`.
pub fn regressor_dims(d: usize, layers: usize) -> Vec<usize> {
    let half = (d / 2).max(1);
    let mut dims = vec![d];
    match layers {
        0 => unreachable!("validated config has at least one regressor layer"),
        1 => {}
        _ => {
            dims.extend(std::iter::repeat_n(d, layers - 2));
            dims.push(half);
        }
    }
    dims.push(1);
    dims
}

#[derive(Debug, Clone)]
struct ViewPath {
    phi_geom: Mlp,
    empty: ParamId,
    phi_cell: Linear,
    transformer: Option<Stack>,
    patch_pool: Option<AttnPool>,
}

#[derive(Debug, Clone)]
struct Selector {
    phi_sel: Linear,
    phi_s: Option<Linear>,
    control: Option<ParamId>,
    stack: Stack,
    psi_hidden: Linear,
    psi_w: ParamId,
    psi_b: ParamId,
}

#[derive(Debug, Clone)]
struct Layout {
    phi_in: Mlp,
    phi_pos: Mlp,
    encoder: Stack,
    scene_pool: Option<AttnPool>,
    views: Option<ViewPath>,
    selector: Option<Selector>,
    fuse: Mlp,
    fuse_norm: LayerNorm,
    regressor: Mlp,
}

/// Graph handles for an encoded scene.
#[derive(Debug, Clone, Copy)]
pub struct EncodedScene {
    pub tokens: Var,
    pub global: Option<Var>,
}

/// Per-view state after selection.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewDescriptor {
    pub descriptor: Vec<f64>,
    pub valid: bool,
    pub utility: f64,
    pub weight: f64,
}

/// Numeric by-products of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub prediction: f64,
    pub views: Vec<ViewDescriptor>,
    /// The top-K set (empty when the selector is bypassed).
    pub selected: Vec<usize>,
}

impl Trace {
    pub fn alpha(&self) -> Vec<f64> {
        self.views.iter().map(|v| v.weight).collect()
    }
}

/// The scene aesthetic regressor.
#[derive(Debug, Clone)]
pub struct Aes3dNet {
    pub config: ModelConfig,
    pub params: ParamStore,
    layout: Layout,
}

impl Aes3dNet {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut params = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = build(&config, &mut Builder::new(&mut params, &mut rng));
        Ok(Self { config, params, layout })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.scalar_count()
    }

    /// Tokens and (when consumed) the pooled scene token.
    pub fn encode_scene(
        &self,
        g: &mut Graph<'_>,
        features: &Tensor,
        positions: &Tensor,
        mask: &[bool],
        ctx: &mut Ctx<'_>,
    ) -> Result<EncodedScene, ModelError> {
        let n = features.rows;
        if positions.shape() != (n, 3) || mask.len() != n {
            return Err(ModelError::Config(format!(
                "encode_scene: {n} feature rows, positions {:?}, mask {}",
                positions.shape(),
                mask.len()
            )));
        }
        if features.cols != self.config.feature_dim() {
            return Err(ModelError::Config(format!(
                "feature width {} does not match the configured {}",
                features.cols,
                self.config.feature_dim()
            )));
        }
        if !mask.iter().any(|&m| m) {
            return Err(ModelError::Config("scene has no valid primitives".into()));
        }
        let l = &self.layout;
        let x = g.input(features.clone());
        let p = g.input(positions.clone());
        let hx = l.phi_in.forward(g, x);
        let hp = l.phi_pos.forward(g, p);
        let h0 = g.add(hx, hp);
        let tokens = l.encoder.forward(g, h0, Some(mask), ctx);
        let global = l.scene_pool.as_ref().map(|pool| pool.forward(g, tokens, Some(mask)));
        Ok(EncodedScene { tokens, global })
    }

    /// `1 × D` view-conditioned context `a_v`.
    pub fn view_context(&self, g: &mut Graph<'_>, camera: &CameraView) -> Var {
        let path = self.layout.views.as_ref().expect("view path present");
        let x = g.input(Tensor::row_vector(view_geometry_input(camera).to_vec()));
        path.phi_geom.forward(g, x)
    }

    /// `1 × D` descriptor of one camera, or `None` when no valid point
    /// projects into its frame.
    pub fn tokenize_view(
        &self,
        g: &mut Graph<'_>,
        tokens: Var,
        positions: &[crate::ingest::Vec3],
        mask: &[bool],
        camera: &CameraView,
        ctx: &mut Ctx<'_>,
    ) -> Option<Var> {
        let path = self.layout.views.as_ref().expect("view path present");
        let gs = self.config.grid_side;
        let valid_rows: Vec<usize> = (0..positions.len()).filter(|&i| mask[i]).collect();
        let projected: Vec<_> = valid_rows.iter().map(|&i| project_point(&positions[i], camera)).collect();
        let cells = assign_to_grid(&projected, gs);
        if cells.is_empty() {
            return None;
        }
        let mut groups = vec![Vec::new(); gs * gs];
        for (cell, members) in cells {
            groups[cell] = members.into_iter().map(|j| valid_rows[j]).collect();
        }
        let occupied: Vec<bool> = groups.iter().map(|m| !m.is_empty()).collect();
        let reduce = match self.config.cell_pool {
            CellPool::MeanMax => CellReduce::MeanMax,
            CellPool::Mean => CellReduce::Mean,
        };
        let empty = g.param(path.empty);
        let b = g.cell_pool(tokens, empty, groups, reduce);
        let r = path.phi_cell.forward(g, b);
        let a = self.view_context(g, camera);
        let mut r = g.add_row(r, a);
        if let Some(stack) = &path.transformer {
            r = stack.forward(g, r, Some(&occupied), ctx);
        }
        Some(match (&path.patch_pool, self.config.patch_pool) {
            (Some(pool), PatchPool::Attention) => pool.forward(g, r, None),
            _ => {
                let rows: Vec<usize> = (0..occupied.len()).filter(|&c| occupied[c]).collect();
                g.mean_rows(r, &rows)
            }
        })
    }

    /// Runs the selector over the `V × D` descriptor matrix and returns
    /// the `1 × V` weights, the numeric utilities and the top-K set.
    pub fn select_views(
        &self,
        g: &mut Graph<'_>,
        descriptors: Var,
        valid: &[bool],
        global: Option<Var>,
        ctx: &mut Ctx<'_>,
    ) -> Result<(Var, Vec<f64>, Vec<usize>), ModelError> {
        let c = &self.config;
        let v = valid.len();
        if !valid.iter().any(|&x| x) {
            return Err(ModelError::Domain("no valid views to select from".into()));
        }
        let Some(sel) = &self.layout.selector else {
            let members: Vec<usize> = (0..v).filter(|&i| valid[i]).collect();
            let alpha = g.input(Tensor::row_vector(uniform_weights(v, &members)));
            return Ok((alpha, vec![0.0; v], Vec::new()));
        };
        let z = sel.phi_sel.forward(g, descriptors);
        let mut parts = Vec::new();
        if let Some(phi_s) = &sel.phi_s {
            let s = global.ok_or_else(|| ModelError::Contract("scene token required by the selector".into()))?;
            parts.push(phi_s.forward(g, s));
        }
        if let Some(ctl) = sel.control {
            parts.push(g.param(ctl));
        }
        let prefix = usize::from(sel.phi_s.is_some()) + sel.control.map_or(0, |_| c.active_control_tokens());
        parts.push(z);
        let seq = g.concat_rows(&parts);
        let mut key_mask = vec![true; prefix];
        key_mask.extend_from_slice(valid);
        let out = sel.stack.forward(g, seq, Some(&key_mask), ctx);
        let rows: Vec<usize> = (prefix..prefix + v).collect();
        let view_out = g.gather_rows(out, &rows);
        let hidden = sel.psi_hidden.forward(g, view_out);
        let hidden = g.gelu(hidden);
        let w = g.param(sel.psi_w);
        let u = g.matmul_nt(w, hidden);
        let bias = g.param(sel.psi_b);
        let ones = g.input(Tensor::filled(1, v, 1.0));
        let bias_row = g.matmul(bias, ones);
        let u = g.add(u, bias_row);
        let utilities = g.value(u).data.clone();
        let set = topk_set(&utilities, valid, c.top_k);
        let alpha = match c.selection_mode {
            SelectionMode::SelectedUniform => g.input(Tensor::row_vector(uniform_weights(v, &set))),
            _ => {
                let mut in_set = vec![false; v];
                for &i in &set {
                    in_set[i] = true;
                }
                let scaled = g.scale(u, 1.0 / c.temperature);
                g.masked_softmax(scaled, &in_set)
            }
        };
        Ok((alpha, utilities, set))
    }

    /// `ŷ = φ_reg(LN(h + φ_fuse(h)))` with `h = α · descriptors`.
    pub fn fuse_and_regress(&self, g: &mut Graph<'_>, alpha: Var, descriptors: Var) -> Result<Var, ModelError> {
        let sum: f64 = g.value(alpha).data.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(ModelError::Contract(format!("view weights sum to {sum}, expected 1")));
        }
        let h = g.matmul(alpha, descriptors);
        Ok(self.regress(g, h))
    }

    fn regress(&self, g: &mut Graph<'_>, h: Var) -> Var {
        let l = &self.layout;
        let f = l.fuse.forward(g, h);
        let r = g.add(h, f);
        let r = l.fuse_norm.forward(g, r);
        l.regressor.forward(g, r)
    }

    /// Records the full forward pass; the returned node is `1 × 1`.
    pub fn forward(&self, g: &mut Graph<'_>, sample: &SceneSample, ctx: &mut Ctx<'_>) -> Result<(Var, Trace), ModelError> {
        let c = &self.config;
        let positions = sample.positions_tensor();
        let enc = self.encode_scene(g, &sample.features, &positions, &sample.mask, ctx)?;
        if !c.uses_views() {
            let s = enc.global.expect("scene token built for the projection-free head");
            let y = self.regress(g, s);
            let trace = Trace { prediction: g.scalar(y), views: Vec::new(), selected: Vec::new() };
            return Ok((y, trace));
        }
        let v = c.candidate_views;
        if sample.cameras.len() > v {
            return Err(ModelError::Config(format!("{} cameras exceed V = {v}", sample.cameras.len())));
        }
        let d = c.hidden_dim;
        let mut rows = Vec::with_capacity(v);
        let mut valid = Vec::with_capacity(v);
        for slot in 0..v {
            let desc = sample
                .cameras
                .get(slot)
                .and_then(|cam| self.tokenize_view(g, enc.tokens, &sample.positions, &sample.mask, cam, ctx));
            valid.push(desc.is_some());
            rows.push(match desc {
                Some(var) => var,
                None => g.input(Tensor::zeros(1, d)),
            });
        }
        if !valid.iter().any(|&x| x) {
            return Err(ModelError::Domain(format!("scene {}: no camera sees any primitive", sample.scene_id)));
        }
        let descriptors = g.concat_rows(&rows);
        let (alpha, utilities, selected) = self.select_views(g, descriptors, &valid, enc.global, ctx)?;
        let y = self.fuse_and_regress(g, alpha, descriptors)?;
        let dv = g.value(descriptors);
        let weights = g.value(alpha);
        let views = (0..v)
            .map(|i| ViewDescriptor {
                descriptor: dv.row(i).to_vec(),
                valid: valid[i],
                utility: utilities[i],
                weight: weights.data[i],
            })
            .collect();
        Ok((y, Trace { prediction: g.scalar(y), views, selected }))
    }

    /// Evaluation-mode prediction.
    pub fn predict(&self, sample: &SceneSample) -> Result<Trace, ModelError> {
        let mut g = Graph::new(&self.params);
        let (_, trace) = self.forward(&mut g, sample, &mut Ctx::eval())?;
        Ok(trace)
    }

    pub fn predict_batch(&self, samples: &[SceneSample]) -> Result<Vec<f64>, ModelError> {
        samples.iter().map(|s| self.predict(s).map(|t| t.prediction)).collect()
    }
}

/// `[R row 0; R row 1; R row 2; o; ln(1+f̃x); ln(1+f̃y); c̃x; c̃y]`.
///
/// Row `k` of `R` equals `Rᵀ e_k`.
pub fn view_geometry_input(camera: &CameraView) -> [f64; VIEW_GEOMETRY_DIM] {
    let mut out = [0.0; VIEW_GEOMETRY_DIM];
    for k in 0..3 {
        out[3 * k..3 * k + 3].copy_from_slice(&camera.rotation[k]);
    }
    out[9..12].copy_from_slice(&camera.center);
    let [fx, fy, cx, cy] = camera.normalized_intrinsics;
    out[12] = fx.ln_1p();
    out[13] = fy.ln_1p();
    out[14] = cx;
    out[15] = cy;
    out
}

fn build(c: &ModelConfig, b: &mut Builder<'_>) -> Layout {
    let d = c.hidden_dim;
    let f = c.feature_dim();
    let phi_in = Mlp::new(b, "phi_in", &[f, d, d]);
    let phi_pos = Mlp::new(b, "phi_pos", &[3, d, d]);
    let encoder = Stack::new(b, "encoder", c.encoder_blocks, d, c.heads, c.mlp_ratio);
    let scene_pool = c.uses_scene_token().then(|| AttnPool::new(b, "scene_pool", d, c.heads));
    let views = c.uses_views().then(|| b.scope("view", |b| ViewPath {
        phi_geom: Mlp::new(b, "phi_geom", &[VIEW_GEOMETRY_DIM, d, d]),
        empty: b.param("empty_cell", 1, d, Init::Normal(0.02)),
        phi_cell: Linear::new(b, "phi_cell", d, d),
        transformer: (c.view_transformer_blocks > 0)
            .then(|| Stack::new(b, "transformer", c.view_transformer_blocks, d, c.heads, c.mlp_ratio)),
        patch_pool: (c.patch_pool == PatchPool::Attention).then(|| AttnPool::new(b, "patch_pool", d, c.heads)),
    }));
    let selector = (c.uses_views() && c.uses_selector()).then(|| b.scope("selector", |b| {
        let half = (d / 2).max(1);
        Selector {
            phi_sel: Linear::new(b, "phi_sel", d, d),
            phi_s: c.use_scene_global_token.then(|| Linear::new(b, "phi_s", d, d)),
            control: c.use_control_tokens.then(|| b.param("control", c.control_tokens, d, Init::Normal(0.02))),
            stack: Stack::new(b, "stack", c.selector_blocks, d, c.heads, c.mlp_ratio),
            psi_hidden: Linear::new(b, "psi.l0", d, half),
            psi_w: b.param("psi.l1.w", 1, half, Init::FanIn(half)),
            psi_b: b.param("psi.l1.b", 1, 1, Init::FanIn(half)),
        }
    }));
    let fuse = Mlp::new(b, "fuse", &[d, 2 * d, d]);
    let fuse_norm = LayerNorm::new(b, "fuse_norm", d);
    let regressor = Mlp::new(b, "regressor", &regressor_dims(d, c.regressor_layers));
    Layout { phi_in, phi_pos, encoder, scene_pool, views, selector, fuse, fuse_norm, regressor }
}

/// Trainable scalars of the model built from `config`.
pub fn count_parameters(config: &ModelConfig) -> Result<usize, ModelError> {
    Ok(Aes3dNet::new(config.clone(), 0)?.parameter_count())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::annotation::LabelVariant;
    use crate::geometry::look_at_camera;
    use crate::model::featurize_primitives;
    use rand::Rng;

    pub(crate) fn toy_sample(config: &ModelConfig, valid: usize, cameras: usize, seed: u64) -> SceneSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = config.n_points;
        let mut positions = vec![[0.0; 3]; n];
        let mut colors = vec![[0.0; 3]; n];
        for i in 0..valid {
            positions[i] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            colors[i] = [rng.random(), rng.random(), rng.random()];
        }
        let mut features = featurize_primitives(&positions, &colors, config.input_variant, None).unwrap();
        for i in valid..n {
            features.row_mut(i).fill(0.0);
        }
        let cams = (0..cameras)
            .map(|k| {
                let th = k as f64 * 2.1 + 0.3;
                look_at_camera(&format!("c{k}"), [3.0 * th.cos(), 3.0 * th.sin(), 0.7 * (k as f64 - 1.0)], 0.8, 1.0)
            })
            .collect();
        SceneSample {
            scene_id: format!("toy{seed}"),
            features,
            positions,
            mask: (0..n).map(|i| i < valid).collect(),
            cameras: cams,
            target: 0.5,
            label_variant: LabelVariant::Attr8,
        }
    }

    #[test]
    fn default_parameter_budget() {
        let n = count_parameters(&ModelConfig::default()).unwrap();
        assert!((2_900_000..=3_500_000).contains(&n), "{n}");
    }

    #[test]
    fn regressor_shapes() {
        assert_eq!(regressor_dims(192, 3), vec![192, 192, 96, 1]);
        assert_eq!(regressor_dims(4, 1), vec![4, 1]);
        assert_eq!(regressor_dims(4, 2), vec![4, 2, 1]);
    }

    #[test]
    fn geometry_input() {
        let cam = look_at_camera("a", [0.0, 0.0, -3.0], 0.5, 1.0);
        let x = view_geometry_input(&cam);
        assert_eq!(x.len(), 16);
        assert!((x[12] - 1.5f64.ln()).abs() < 1e-12);
        let i3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let cam = CameraView::new("b", 1.0, 1.0, 0.5, 0.5, 1.0, 1.0, i3, [0.0, 0.0, 3.0]).unwrap();
        assert_eq!(&view_geometry_input(&cam)[..9], &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn forward_is_deterministic_and_simplex() {
        let cfg = ModelConfig::tiny();
        let net = Aes3dNet::new(cfg.clone(), 3).unwrap();
        let s = toy_sample(&cfg, 24, 4, 1);
        let a = net.predict(&s).unwrap();
        let b = net.predict(&s).unwrap();
        assert_eq!(a, b);
        let alpha = a.alpha();
        assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(alpha.iter().filter(|&&w| w > 0.0).count() <= cfg.top_k);
        for v in &a.views {
            if !v.valid {
                assert_eq!(v.weight, 0.0);
            }
        }
    }

    #[test]
    fn padded_rows_do_not_matter() {
        let cfg = ModelConfig::tiny();
        let net = Aes3dNet::new(cfg.clone(), 5).unwrap();
        let s = toy_sample(&cfg, 20, 4, 2);
        let mut t = s.clone();
        for i in 20..cfg.n_points {
            t.features.row_mut(i).fill(7.5);
            t.positions[i] = [0.1, -0.2, 0.3];
        }
        let a = net.predict(&s).unwrap().prediction;
        let b = net.predict(&t).unwrap().prediction;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn scene_encoding_is_permutation_equivariant() {
        let cfg = ModelConfig { n_points: 32, hidden_dim: 16, ..ModelConfig::tiny() };
        let net = Aes3dNet::new(cfg.clone(), 8).unwrap();
        let s = toy_sample(&cfg, 32, 4, 3);
        let perm: Vec<usize> = (0..32).map(|i| (i * 7 + 3) % 32).collect();
        let features_p = Tensor::from_rows(&perm.iter().map(|&i| s.features.row(i).to_vec()).collect::<Vec<_>>());
        let pos = s.positions_tensor();
        let pos_p = Tensor::from_rows(&perm.iter().map(|&i| pos.row(i).to_vec()).collect::<Vec<_>>());
        let mut g = Graph::new(&net.params);
        let e = net.encode_scene(&mut g, &s.features, &pos, &s.mask, &mut Ctx::eval()).unwrap();
        let ep = net.encode_scene(&mut g, &features_p, &pos_p, &s.mask, &mut Ctx::eval()).unwrap();
        let (t, tp) = (g.value(e.tokens), g.value(ep.tokens));
        assert_eq!(t.shape(), (32, 16));
        for (r, &i) in perm.iter().enumerate() {
            for c in 0..16 {
                assert!((tp.at(r, c) - t.at(i, c)).abs() < 1e-9);
            }
        }
        let (sg, sgp) = (g.value(e.global.unwrap()), g.value(ep.global.unwrap()));
        assert_eq!(sg.shape(), (1, 16));
        assert!(sg.max_abs_diff(sgp) < 1e-9);
    }

    #[test]
    fn projection_free_mode_ignores_cameras() {
        let cfg = ModelConfig { selection_mode: SelectionMode::NoneProjection, ..ModelConfig::tiny() };
        let net = Aes3dNet::new(cfg.clone(), 1).unwrap();
        let s = toy_sample(&cfg, 30, 4, 4);
        let mut t = s.clone();
        t.cameras.truncate(1);
        t.cameras[0] = look_at_camera("x", [0.0, 5.0, 1.0], 2.0, 1.0);
        assert_eq!(net.predict(&s).unwrap().prediction, net.predict(&t).unwrap().prediction);
    }

    #[test]
    fn uniform_modes() {
        let cfg = ModelConfig { selection_mode: SelectionMode::Uniform, ..ModelConfig::tiny() };
        let net = Aes3dNet::new(cfg.clone(), 1).unwrap();
        let tr = net.predict(&toy_sample(&cfg, 30, 4, 4)).unwrap();
        let valid = tr.views.iter().filter(|v| v.valid).count();
        for v in &tr.views {
            assert_eq!(v.weight, if v.valid { 1.0 / valid as f64 } else { 0.0 });
        }
        let cfg = ModelConfig { selection_mode: SelectionMode::SelectedUniform, ..ModelConfig::tiny() };
        let net = Aes3dNet::new(cfg.clone(), 1).unwrap();
        let tr = net.predict(&toy_sample(&cfg, 30, 4, 4)).unwrap();
        for (i, v) in tr.views.iter().enumerate() {
            assert_eq!(v.weight, if tr.selected.contains(&i) { 0.5 } else { 0.0 });
        }
    }

    #[test]
    fn camera_behind_everything_is_invalid() {
        let cfg = ModelConfig::tiny();
        let net = Aes3dNet::new(cfg.clone(), 2).unwrap();
        let mut s = toy_sample(&cfg, 30, 2, 6);
        // looks away from the cloud
        let i3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        s.cameras.push(CameraView::new("away", 1.0, 1.0, 0.5, 0.5, 1.0, 1.0, i3, [0.0, 0.0, -10.0]).unwrap());
        let tr = net.predict(&s).unwrap();
        assert_eq!(tr.views.iter().map(|v| v.valid).collect::<Vec<_>>(), vec![true, true, false, false]);
        assert_eq!(tr.views[2].weight, 0.0);
    }
}
