//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Graph`] records every operation of one forward pass. Parameters are
//! referenced in place from a borrowed [`ParamStore`]; calling
//! [`Graph::backward`] accumulates `d output / d parameter` into a
//! [`ParamGrads`] buffer. Nodes that depend on no parameter are never
//! differentiated.

use super::params::{ParamGrads, ParamId, ParamStore};
use super::tensor::{gemm, gemm_into, MatMut, MatRef, Tensor};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// How a grid cell summarises the tokens that land in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellReduce {
    MeanMax,
    Mean,
}

const LN_EPS: f64 = 1e-5;

enum Op {
    Input,
    Param(ParamId),
    MatMul { a: Var, b: Var, transpose_b: bool },
    Add(Var, Var),
    AddRow(Var, Var),
    MulConst(Var, Tensor),
    Scale(Var, f64),
    Gelu(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, stats: Vec<(f64, f64)> },
    Attention { q: Var, k: Var, v: Var, heads: usize, probs: Vec<Tensor> },
    MaskedSoftmax { x: Var },
    ConcatRows(Vec<Var>),
    GatherRows { x: Var, idx: Vec<usize> },
    CellPool { x: Var, empty: Var, groups: Vec<Vec<usize>>, argmax: Vec<Vec<usize>>, reduce: CellReduce },
    MeanRows { x: Var, rows: Vec<usize> },
}

struct Node {
    value: Option<Tensor>,
    op: Op,
    needs_grad: bool,
}

pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self { params, nodes: Vec::new(), param_vars: vec![None; params.len()] }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.get(*id),
            (None, _) => unreachable!("non-parameter node without a value"),
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let t = self.value(v);
        assert_eq!(t.shape(), (1, 1), "not a scalar node");
        t.data[0]
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value: Some(value), op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A constant input; never differentiated.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input, false)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node { value: None, op: Op::Param(id), needs_grad: true });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).matmul(self.value(b));
        let ng = self.needs(a) || self.needs(b);
        self.push(out, Op::MatMul { a, b, transpose_b: false }, ng)
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        let mut out = Tensor::zeros(ta.rows, tb.rows);
        gemm(MatRef::normal(ta), MatRef::transposed(tb), &mut out, 0.0);
        let ng = self.needs(a) || self.needs(b);
        self.push(out, Op::MatMul { a, b, transpose_b: true }, ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        assert_eq!(out.shape(), self.shape(b), "add shape mismatch");
        out.add_assign(self.value(b));
        let ng = self.needs(a) || self.needs(b);
        self.push(out, Op::Add(a, b), ng)
    }

    /// Adds the `1 × m` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        let bias = self.value(b);
        assert_eq!((1, out.cols), bias.shape(), "row broadcast shape mismatch");
        for r in 0..out.rows {
            for (o, x) in out.row_mut(r).iter_mut().zip(&bias.data) {
                *o += x;
            }
        }
        let ng = self.needs(a) || self.needs(b);
        self.push(out, Op::AddRow(a, b), ng)
    }

    /// Elementwise product with a constant (dropout masks).
    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Var {
        let mut out = self.value(a).clone();
        assert_eq!(out.shape(), c.shape());
        for (o, m) in out.data.iter_mut().zip(&c.data) {
            *o *= m;
        }
        let ng = self.needs(a);
        self.push(out, Op::MulConst(a, c), ng)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let mut out = self.value(a).clone();
        out.scale_in_place(s);
        let ng = self.needs(a);
        self.push(out, Op::Scale(a, s), ng)
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let out = Tensor::from_vec(src.rows, src.cols, src.data.iter().map(|&x| gelu(x)).collect());
        let ng = self.needs(a);
        self.push(out, Op::Gelu(a), ng)
    }

    /// Row-wise layer normalisation with affine `gamma`, `beta` (each `1 × cols`).
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let src = self.value(x);
        let (g, b) = (self.value(gamma), self.value(beta));
        let cols = src.cols;
        let mut out = Tensor::zeros(src.rows, cols);
        let mut stats = Vec::with_capacity(src.rows);
        for r in 0..src.rows {
            let row = src.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let rstd = 1.0 / (var + LN_EPS).sqrt();
            for (c, o) in out.row_mut(r).iter_mut().enumerate() {
                *o = (row[c] - mean) * rstd * g.data[c] + b.data[c];
            }
            stats.push((mean, rstd));
        }
        let ng = self.needs(x) || self.needs(gamma) || self.needs(beta);
        self.push(out, Op::LayerNorm { x, gamma, beta, stats }, ng)
    }

    /// Scaled dot-product attention split over `heads` column blocks.
    ///
    /// `q` is `nq × d`, `k` and `v` are `nk × d`. Keys with `key_mask[j] ==
    /// false` receive exactly zero weight; a query with no attendable key
    /// yields a zero row.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, key_mask: Option<&[bool]>) -> Var {
        let (tq, tk, tv) = (self.value(q), self.value(k), self.value(v));
        let (nq, d) = tq.shape();
        let nk = tk.rows;
        assert_eq!(tk.cols, d);
        assert_eq!(tv.shape(), (nk, d));
        assert!(heads >= 1 && d % heads == 0, "hidden size {d} not divisible by {heads} heads");
        if let Some(m) = key_mask {
            assert_eq!(m.len(), nk);
        }
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut out = Tensor::zeros(nq, d);
        let mut probs = Vec::with_capacity(heads);
        for h in 0..heads {
            let mut s = Tensor::zeros(nq, nk);
            gemm(MatRef::col_block(tq, h * dh, dh), MatRef::col_block(tk, h * dh, dh).t(), &mut s, 0.0);
            for r in 0..nq {
                masked_softmax_row(s.row_mut(r), key_mask, scale);
            }
            gemm_into(MatRef::normal(&s), MatRef::col_block(tv, h * dh, dh), MatMut::col_block(&mut out, h * dh, dh), 0.0);
            probs.push(s);
        }
        let ng = self.needs(q) || self.needs(k) || self.needs(v);
        self.push(out, Op::Attention { q, k, v, heads, probs }, ng)
    }

    /// Softmax over each row restricted to `mask`; masked entries are exactly 0.
    pub fn masked_softmax(&mut self, x: Var, mask: &[bool]) -> Var {
        let mut out = self.value(x).clone();
        assert_eq!(out.cols, mask.len());
        for r in 0..out.rows {
            masked_softmax_row(out.row_mut(r), Some(mask), 1.0);
        }
        let ng = self.needs(x);
        self.push(out, Op::MaskedSoftmax { x }, ng)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.shape(parts[0]).1;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            assert_eq!(t.cols, cols, "concat_rows column mismatch");
            data.extend_from_slice(&t.data);
            rows += t.rows;
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push(Tensor::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()), ng)
    }

    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Var {
        let src = self.value(x);
        let mut out = Tensor::zeros(idx.len(), src.cols);
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).copy_from_slice(src.row(i));
        }
        let ng = self.needs(x);
        self.push(out, Op::GatherRows { x, idx: idx.to_vec() }, ng)
    }

    /// One output row per group: the reduction of the member rows of `x`, or
    /// the `1 × d` row `empty` when the group has no members. Max ties go to
    /// the lowest member index.
    pub fn cell_pool(&mut self, x: Var, empty: Var, groups: Vec<Vec<usize>>, reduce: CellReduce) -> Var {
        let src = self.value(x);
        let e = self.value(empty);
        let d = src.cols;
        assert_eq!(e.shape(), (1, d));
        let mut out = Tensor::zeros(groups.len(), d);
        let mut argmax = Vec::with_capacity(groups.len());
        for (m, members) in groups.iter().enumerate() {
            let row = out.row_mut(m);
            if members.is_empty() {
                row.copy_from_slice(&e.data);
                argmax.push(Vec::new());
                continue;
            }
            let inv = 1.0 / members.len() as f64;
            for &i in members {
                for (o, x) in row.iter_mut().zip(src.row(i)) {
                    *o += x * inv;
                }
            }
            if reduce == CellReduce::MeanMax {
                let mut best = vec![members[0]; d];
                for &i in &members[1..] {
                    for c in 0..d {
                        if src.at(i, c) > src.at(best[c], c) {
                            best[c] = i;
                        }
                    }
                }
                for c in 0..d {
                    row[c] += src.at(best[c], c);
                }
                argmax.push(best);
            } else {
                argmax.push(Vec::new());
            }
        }
        let ng = self.needs(x) || self.needs(empty);
        self.push(out, Op::CellPool { x, empty, groups, argmax, reduce }, ng)
    }

    /// Mean of the listed rows, as a `1 × d` row.
    pub fn mean_rows(&mut self, x: Var, rows: &[usize]) -> Var {
        assert!(!rows.is_empty(), "mean over zero rows");
        let src = self.value(x);
        let mut out = Tensor::zeros(1, src.cols);
        let inv = 1.0 / rows.len() as f64;
        for &r in rows {
            for (o, v) in out.data.iter_mut().zip(src.row(r)) {
                *o += v * inv;
            }
        }
        let ng = self.needs(x);
        self.push(out, Op::MeanRows { x, rows: rows.to_vec() }, ng)
    }

    /// Back-propagates `seed · d output` and accumulates parameter gradients.
    pub fn backward(&self, output: Var, seed: f64, grads: &mut ParamGrads) {
        assert_eq!(self.shape(output), (1, 1), "backward from a non-scalar node");
        if !self.needs(output) {
            return;
        }
        let mut adj: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[output.0] = Some(Tensor::from_vec(1, 1, vec![seed]));

        for idx in (0..=output.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Input => {}
                Op::Param(id) => grads.get_mut(*id).add_assign(&g),
                Op::MatMul { a, b, transpose_b } => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    if self.needs(*a) {
                        let mut da = Tensor::zeros(ta.rows, ta.cols);
                        if *transpose_b {
                            gemm(MatRef::normal(&g), MatRef::normal(tb), &mut da, 0.0);
                        } else {
                            gemm(MatRef::normal(&g), MatRef::transposed(tb), &mut da, 0.0);
                        }
                        accumulate(&mut adj, *a, da);
                    }
                    if self.needs(*b) {
                        let mut db = Tensor::zeros(tb.rows, tb.cols);
                        if *transpose_b {
                            gemm(MatRef::transposed(&g), MatRef::normal(ta), &mut db, 0.0);
                        } else {
                            gemm(MatRef::transposed(ta), MatRef::normal(&g), &mut db, 0.0);
                        }
                        accumulate(&mut adj, *b, db);
                    }
                }
                Op::Add(a, b) => {
                    if self.needs(*a) {
                        accumulate(&mut adj, *a, g.clone());
                    }
                    if self.needs(*b) {
                        accumulate(&mut adj, *b, g);
                    }
                }
                Op::AddRow(a, b) => {
                    if self.needs(*b) {
                        let mut db = Tensor::zeros(1, g.cols);
                        for r in 0..g.rows {
                            for (o, x) in db.data.iter_mut().zip(g.row(r)) {
                                *o += x;
                            }
                        }
                        accumulate(&mut adj, *b, db);
                    }
                    if self.needs(*a) {
                        accumulate(&mut adj, *a, g);
                    }
                }
                Op::MulConst(a, c) => {
                    let mut da = g;
                    for (o, m) in da.data.iter_mut().zip(&c.data) {
                        *o *= m;
                    }
                    accumulate(&mut adj, *a, da);
                }
                Op::Scale(a, s) => {
                    let mut da = g;
                    da.scale_in_place(*s);
                    accumulate(&mut adj, *a, da);
                }
                Op::Gelu(a) => {
                    let src = self.value(*a);
                    let mut da = g;
                    for (o, &x) in da.data.iter_mut().zip(&src.data) {
                        *o *= gelu_grad(x);
                    }
                    accumulate(&mut adj, *a, da);
                }
                Op::LayerNorm { x, gamma, beta, stats } => {
                    self.layer_norm_backward(&g, *x, *gamma, *beta, stats, &mut adj);
                }
                Op::Attention { q, k, v, heads, probs } => {
                    self.attention_backward(&g, *q, *k, *v, *heads, probs, &mut adj);
                }
                Op::MaskedSoftmax { x } => {
                    let y = node.value.as_ref().expect("softmax output");
                    let mut dx = Tensor::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        softmax_row_backward(y.row(r), g.row(r), dx.row_mut(r), 1.0);
                    }
                    accumulate(&mut adj, *x, dx);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let (rows, cols) = self.shape(p);
                        if self.needs(p) {
                            let slice = g.data[offset * cols..(offset + rows) * cols].to_vec();
                            accumulate(&mut adj, p, Tensor::from_vec(rows, cols, slice));
                        }
                        offset += rows;
                    }
                }
                Op::GatherRows { x, idx } => {
                    let (rows, cols) = self.shape(*x);
                    let mut dx = Tensor::zeros(rows, cols);
                    for (r, &i) in idx.iter().enumerate() {
                        for (o, v) in dx.row_mut(i).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut adj, *x, dx);
                }
                Op::CellPool { x, empty, groups, argmax, reduce } => {
                    let (rows, cols) = self.shape(*x);
                    let mut dx = Tensor::zeros(rows, cols);
                    let mut de = Tensor::zeros(1, cols);
                    for (m, members) in groups.iter().enumerate() {
                        let gm = g.row(m);
                        if members.is_empty() {
                            for (o, v) in de.data.iter_mut().zip(gm) {
                                *o += v;
                            }
                            continue;
                        }
                        let inv = 1.0 / members.len() as f64;
                        for &i in members {
                            for (o, v) in dx.row_mut(i).iter_mut().zip(gm) {
                                *o += v * inv;
                            }
                        }
                        if *reduce == CellReduce::MeanMax {
                            for (c, &i) in argmax[m].iter().enumerate() {
                                dx.data[i * cols + c] += gm[c];
                            }
                        }
                    }
                    if self.needs(*x) {
                        accumulate(&mut adj, *x, dx);
                    }
                    if self.needs(*empty) {
                        accumulate(&mut adj, *empty, de);
                    }
                }
                Op::MeanRows { x, rows } => {
                    let (nr, cols) = self.shape(*x);
                    let mut dx = Tensor::zeros(nr, cols);
                    let inv = 1.0 / rows.len() as f64;
                    for &r in rows {
                        for (o, v) in dx.row_mut(r).iter_mut().zip(&g.data) {
                            *o += v * inv;
                        }
                    }
                    accumulate(&mut adj, *x, dx);
                }
            }
        }
    }

    fn layer_norm_backward(
        &self,
        g: &Tensor,
        x: Var,
        gamma: Var,
        beta: Var,
        stats: &[(f64, f64)],
        adj: &mut [Option<Tensor>],
    ) {
        let src = self.value(x);
        let gam = self.value(gamma);
        let cols = src.cols;
        let mut dgamma = Tensor::zeros(1, cols);
        let mut dbeta = Tensor::zeros(1, cols);
        let mut dx = Tensor::zeros(src.rows, cols);
        let mut xhat = vec![0.0; cols];
        let mut dxhat = vec![0.0; cols];
        for r in 0..src.rows {
            let (mean, rstd) = stats[r];
            let gr = g.row(r);
            for c in 0..cols {
                xhat[c] = (src.at(r, c) - mean) * rstd;
                dgamma.data[c] += gr[c] * xhat[c];
                dbeta.data[c] += gr[c];
                dxhat[c] = gr[c] * gam.data[c];
            }
            let m1 = dxhat.iter().sum::<f64>() / cols as f64;
            let m2 = dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / cols as f64;
            for (c, o) in dx.row_mut(r).iter_mut().enumerate() {
                *o = rstd * (dxhat[c] - m1 - xhat[c] * m2);
            }
        }
        if self.needs(x) {
            accumulate(adj, x, dx);
        }
        if self.needs(gamma) {
            accumulate(adj, gamma, dgamma);
        }
        if self.needs(beta) {
            accumulate(adj, beta, dbeta);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn attention_backward(
        &self,
        g: &Tensor,
        q: Var,
        k: Var,
        v: Var,
        heads: usize,
        probs: &[Tensor],
        adj: &mut [Option<Tensor>],
    ) {
        let (tq, tk, tv) = (self.value(q), self.value(k), self.value(v));
        let (nq, d) = tq.shape();
        let nk = tk.rows;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut dq = Tensor::zeros(nq, d);
        let mut dk = Tensor::zeros(nk, d);
        let mut dv = Tensor::zeros(nk, d);
        for (h, p) in probs.iter().enumerate() {
            let go = MatRef::col_block(g, h * dh, dh);
            if self.needs(v) {
                gemm_into(MatRef::normal(p).t(), go, MatMut::col_block(&mut dv, h * dh, dh), 0.0);
            }
            if !(self.needs(q) || self.needs(k)) {
                continue;
            }
            let mut dp = Tensor::zeros(nq, nk);
            gemm(go, MatRef::col_block(tv, h * dh, dh).t(), &mut dp, 0.0);
            let mut ds = Tensor::zeros(nq, nk);
            for r in 0..nq {
                softmax_row_backward(p.row(r), dp.row(r), ds.row_mut(r), scale);
            }
            if self.needs(q) {
                gemm_into(MatRef::normal(&ds), MatRef::col_block(tk, h * dh, dh), MatMut::col_block(&mut dq, h * dh, dh), 0.0);
            }
            if self.needs(k) {
                gemm_into(MatRef::normal(&ds).t(), MatRef::col_block(tq, h * dh, dh), MatMut::col_block(&mut dk, h * dh, dh), 0.0);
            }
        }
        if self.needs(q) {
            accumulate(adj, q, dq);
        }
        if self.needs(k) {
            accumulate(adj, k, dk);
        }
        if self.needs(v) {
            accumulate(adj, v, dv);
        }
    }
}

fn accumulate(adj: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut adj[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// In-place `softmax(scale · row)` over the entries allowed by `mask`.
fn masked_softmax_row(row: &mut [f64], mask: Option<&[bool]>, scale: f64) {
    let allowed = |j: usize| mask.is_none_or(|m| m[j]);
    let mut max = f64::NEG_INFINITY;
    for (j, &x) in row.iter().enumerate() {
        if allowed(j) {
            max = max.max(x * scale);
        }
    }
    if max == f64::NEG_INFINITY {
        row.fill(0.0);
        return;
    }
    let mut sum = 0.0;
    for (j, x) in row.iter_mut().enumerate() {
        if allowed(j) {
            *x = (*x * scale - max).exp();
            sum += *x;
        } else {
            *x = 0.0;
        }
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

/// `dx = scale · y ⊙ (dy − ⟨y, dy⟩)`, the softmax Jacobian-vector product.
fn softmax_row_backward(y: &[f64], dy: &[f64], dx: &mut [f64], scale: f64) {
    let dot: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
    for ((o, &yy), &gg) in dx.iter_mut().zip(y).zip(dy) {
        *o = scale * yy * (gg - dot);
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let inner = GELU_C * (x + 0.044715 * x * x * x);
    let t = inner.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}
