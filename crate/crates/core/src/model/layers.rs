//! Parameterized building blocks recorded onto a [`Graph`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Graph, Init, ParamId, ParamStore, Tensor, Var};

/// Registers and initializes parameters under a dotted name prefix.
pub struct Builder<'a> {
    pub store: &'a mut ParamStore,
    pub rng: &'a mut ChaCha8Rng,
    prefix: String,
}

impl<'a> Builder<'a> {
    pub fn new(store: &'a mut ParamStore, rng: &'a mut ChaCha8Rng) -> Self {
        Self { store, rng, prefix: String::new() }
    }

    pub fn scope<T>(&mut self, name: &str, f: impl FnOnce(&mut Builder<'_>) -> T) -> T {
        let saved = self.prefix.clone();
        self.prefix = if saved.is_empty() { name.to_string() } else { format!("{saved}.{name}") };
        let out = f(self);
        self.prefix = saved;
        out
    }

    pub fn param(&mut self, name: &str, rows: usize, cols: usize, init: Init) -> ParamId {
        let full = if self.prefix.is_empty() { name.to_string() } else { format!("{}.{name}", self.prefix) };
        let id = self.store.register(full, rows, cols);
        self.store.init(id, init, self.rng);
        id
    }
}

/// Dropout state for one forward pass; `None` means evaluation mode.
pub struct Ctx<'r> {
    pub dropout: f64,
    pub rng: Option<&'r mut ChaCha8Rng>,
}

impl<'r> Ctx<'r> {
    pub fn eval() -> Self {
        Self { dropout: 0.0, rng: None }
    }

    pub fn train(dropout: f64, rng: &'r mut ChaCha8Rng) -> Self {
        Self { dropout, rng: Some(rng) }
    }

    /// Inverted dropout; the identity in evaluation mode.
    pub fn dropout(&mut self, g: &mut Graph<'_>, x: Var) -> Var {
        let p = self.dropout;
        let Some(rng) = self.rng.as_deref_mut() else { return x };
        if p <= 0.0 {
            return x;
        }
        let (r, c) = g.shape(x);
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..r * c).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect();
        g.mul_const(x, Tensor::from_vec(r, c, mask))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new(b: &mut Builder<'_>, name: &str, d_in: usize, d_out: usize) -> Self {
        b.scope(name, |b| Self {
            w: b.param("w", d_in, d_out, Init::FanIn(d_in)),
            b: b.param("b", 1, d_out, Init::FanIn(d_in)),
        })
    }

    pub fn param_count(d_in: usize, d_out: usize) -> usize {
        d_in * d_out + d_out
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Var {
        let (w, b) = (g.param(self.w), g.param(self.b));
        let y = g.matmul(x, w);
        g.add_row(y, b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(b: &mut Builder<'_>, name: &str, d: usize) -> Self {
        b.scope(name, |b| Self {
            gamma: b.param("gamma", 1, d, Init::Const(1.0)),
            beta: b.param("beta", 1, d, Init::Const(0.0)),
        })
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Var {
        let (gamma, beta) = (g.param(self.gamma), g.param(self.beta));
        g.layer_norm(x, gamma, beta)
    }
}

/// Linear layers with GELU between them (none after the last).
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new(b: &mut Builder<'_>, name: &str, dims: &[usize]) -> Self {
        b.scope(name, |b| Self {
            layers: dims.windows(2).enumerate().map(|(i, w)| Linear::new(b, &format!("l{i}"), w[0], w[1])).collect(),
        })
    }

    pub fn param_count(dims: &[usize]) -> usize {
        dims.windows(2).map(|w| Linear::param_count(w[0], w[1])).sum()
    }

    pub fn forward(&self, g: &mut Graph<'_>, mut x: Var) -> Var {
        for (i, l) in self.layers.iter().enumerate() {
            if i > 0 {
                x = g.gelu(x);
            }
            x = l.forward(g, x);
        }
        x
    }
}

/// Pre-norm transformer block: multi-head self-attention then a GELU MLP,
/// each added back through a residual connection.
#[derive(Debug, Clone)]
pub struct Block {
    pub ln1: LayerNorm,
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub ln2: LayerNorm,
    pub mlp: Mlp,
    pub heads: usize,
}

impl Block {
    pub fn new(b: &mut Builder<'_>, name: &str, d: usize, heads: usize, mlp_ratio: usize) -> Self {
        b.scope(name, |b| Self {
            ln1: LayerNorm::new(b, "ln1", d),
            q: Linear::new(b, "q", d, d),
            k: Linear::new(b, "k", d, d),
            v: Linear::new(b, "v", d, d),
            o: Linear::new(b, "o", d, d),
            ln2: LayerNorm::new(b, "ln2", d),
            mlp: Mlp::new(b, "mlp", &[d, mlp_ratio * d, d]),
            heads,
        })
    }

    pub fn param_count(d: usize, mlp_ratio: usize) -> usize {
        4 * d + 4 * Linear::param_count(d, d) + Mlp::param_count(&[d, mlp_ratio * d, d])
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var, key_mask: Option<&[bool]>, ctx: &mut Ctx<'_>) -> Var {
        let h = self.ln1.forward(g, x);
        let q = self.q.forward(g, h);
        let k = self.k.forward(g, h);
        let v = self.v.forward(g, h);
        let a = g.attention(q, k, v, self.heads, key_mask);
        let a = self.o.forward(g, a);
        let a = ctx.dropout(g, a);
        let x = g.add(x, a);
        let h = self.ln2.forward(g, x);
        let m = self.mlp.forward(g, h);
        let m = ctx.dropout(g, m);
        g.add(x, m)
    }
}

/// Stack of blocks followed by a final layer norm.
#[derive(Debug, Clone)]
pub struct Stack {
    pub blocks: Vec<Block>,
    pub norm: LayerNorm,
}

impl Stack {
    pub fn new(b: &mut Builder<'_>, name: &str, depth: usize, d: usize, heads: usize, mlp_ratio: usize) -> Self {
        b.scope(name, |b| Self {
            blocks: (0..depth).map(|i| Block::new(b, &format!("block{i}"), d, heads, mlp_ratio)).collect(),
            norm: LayerNorm::new(b, "norm", d),
        })
    }

    pub fn param_count(depth: usize, d: usize, mlp_ratio: usize) -> usize {
        depth * Block::param_count(d, mlp_ratio) + 2 * d
    }

    pub fn forward(&self, g: &mut Graph<'_>, mut x: Var, key_mask: Option<&[bool]>, ctx: &mut Ctx<'_>) -> Var {
        for blk in &self.blocks {
            x = blk.forward(g, x, key_mask, ctx);
        }
        self.norm.forward(g, x)
    }
}

/// Attention pooling with one learned query.
#[derive(Debug, Clone)]
pub struct AttnPool {
    pub query: ParamId,
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
}

impl AttnPool {
    pub fn new(b: &mut Builder<'_>, name: &str, d: usize, heads: usize) -> Self {
        b.scope(name, |b| Self {
            query: b.param("query", 1, d, Init::Normal(0.02)),
            q: Linear::new(b, "q", d, d),
            k: Linear::new(b, "k", d, d),
            v: Linear::new(b, "v", d, d),
            o: Linear::new(b, "o", d, d),
            heads,
        })
    }

    pub fn param_count(d: usize) -> usize {
        d + 4 * Linear::param_count(d, d)
    }

    /// `1 × d` summary of the rows of `x` allowed by `key_mask`.
    pub fn forward(&self, g: &mut Graph<'_>, x: Var, key_mask: Option<&[bool]>) -> Var {
        let query = g.param(self.query);
        let q = self.q.forward(g, query);
        let k = self.k.forward(g, x);
        let v = self.v.forward(g, x);
        let a = g.attention(q, k, v, self.heads, key_mask);
        self.o.forward(g, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn counts_match_registration() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut b = Builder::new(&mut store, &mut rng);
        Linear::new(&mut b, "lin", 4, 2);
        assert_eq!(b.store.scalar_count(), 10);
        let before = b.store.scalar_count();
        Block::new(&mut b, "blk", 8, 2, 2);
        assert_eq!(b.store.scalar_count() - before, Block::param_count(8, 2));
        let before = b.store.scalar_count();
        AttnPool::new(&mut b, "pool", 8, 2);
        assert_eq!(b.store.scalar_count() - before, AttnPool::param_count(8));
        assert_eq!(store.name(ParamId(0)), "lin.w");
    }

    #[test]
    fn dropout_is_identity_in_eval() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let x = g.input(Tensor::filled(3, 4, 2.0));
        let y = Ctx::eval().dropout(&mut g, x);
        assert_eq!(x, y);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = Ctx::train(0.5, &mut rng).dropout(&mut g, x);
        assert!(g.value(z).data.iter().all(|&v| v == 0.0 || v == 4.0));
    }
}
