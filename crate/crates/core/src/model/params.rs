//! Named parameter storage and the matching gradient buffers.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// How a parameter is initialised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform in `±1/sqrt(fan_in)`.
    FanIn(usize),
    Normal(f64),
    Const(f64),
}

/// Flat, ordered store of every trainable tensor in a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self { names: Vec::new(), tensors: Vec::new() }
    }

    /// Registers a zero tensor; values are filled in by [`ParamStore::init`].
    pub fn register(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        let name = name.into();
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.tensors.push(Tensor::zeros(rows, cols));
        ParamId(self.tensors.len() - 1)
    }

    pub fn init<R: Rng + ?Sized>(&mut self, id: ParamId, init: Init, rng: &mut R) {
        let t = &mut self.tensors[id.0];
        match init {
            Init::FanIn(fan_in) => {
                let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                for v in &mut t.data {
                    *v = dist.sample(rng);
                }
            }
            Init::Normal(std) => {
                let dist = Normal::new(0.0, std).expect("positive std");
                for v in &mut t.data {
                    *v = dist.sample(rng);
                }
            }
            Init::Const(c) => t.data.fill(c),
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.tensors.iter_mut()
    }

    /// Total number of trainable scalars.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn to_named_map(&self) -> BTreeMap<String, Tensor> {
        self.iter().map(|(n, t)| (n.to_owned(), t.clone())).collect()
    }

    /// Overwrites every tensor from `map`; names and shapes must match exactly.
    pub fn load_named_map(&mut self, map: &BTreeMap<String, Tensor>) -> Result<(), String> {
        if map.len() != self.names.len() {
            return Err(format!("expected {} parameters, found {}", self.names.len(), map.len()));
        }
        for (name, t) in self.names.iter().zip(self.tensors.iter_mut()) {
            let src = map.get(name).ok_or_else(|| format!("missing parameter {name}"))?;
            if src.shape() != t.shape() || src.data.len() != t.data.len() {
                return Err(format!(
                    "parameter {name}: expected shape {:?}, found {:?}",
                    t.shape(),
                    src.shape()
                ));
            }
            t.data.copy_from_slice(&src.data);
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> ParamGrads {
        ParamGrads { grads: self.tensors.iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect() }
    }
}

/// Gradient buffers aligned one-to-one with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub grads: Vec<Tensor>,
}

impl ParamGrads {
    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.grads[id.0]
    }

    pub fn global_norm(&self) -> f64 {
        self.grads.iter().map(Tensor::sum_sq).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.grads {
            g.scale_in_place(s);
        }
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.add_assign(b);
        }
    }

    pub fn zero(&mut self) {
        for g in &mut self.grads {
            g.data.fill(0.0);
        }
    }
}
