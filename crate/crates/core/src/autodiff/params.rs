use std::collections::BTreeMap;

use rand::Rng;

use super::graph::{Gradients, Graph, Var};
use crate::error::{Error, Result};

/// Dense parameter tensor. Values are held as `f64` but every value written
/// by the optimizer or a checkpoint load is representable as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::ShapeMismatch(format!("zero-sized dim in {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {n} values, got {}",
                values.len()
            )));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            values: vec![0.0; n],
        }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            values: vec![v; n],
        }
    }

    /// Glorot-uniform initialization for a `fan_in x fan_out` weight.
    pub fn xavier<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let values = (0..fan_in * fan_out)
            .map(|_| round_f32(rng.random_range(-bound..bound)))
            .collect();
        Self {
            shape: vec![fan_in, fan_out],
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// View as a matrix: 1-D tensors are single rows.
    pub fn matrix_dims(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            other => (
                other[..other.len() - 1].iter().product(),
                other[other.len() - 1],
            ),
        }
    }
}

pub(crate) fn round_f32(x: f64) -> f64 {
    x as f32 as f64
}

/// Named parameters with sorted, stable iteration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.params.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.params.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    /// Checks that `other` has exactly the same names and shapes.
    pub fn check_compatible(&self, other: &ParamStore) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} vs {} parameters",
                self.params.len(),
                other.params.len()
            )));
        }
        for ((na, ta), (nb, tb)) in self.params.iter().zip(&other.params) {
            if na != nb || ta.shape != tb.shape {
                return Err(Error::ShapeMismatch(format!(
                    "`{na}` {:?} vs `{nb}` {:?}",
                    ta.shape, tb.shape
                )));
            }
        }
        Ok(())
    }
}

/// Parameters of a [`ParamStore`] bound as trainable leaves on one graph.
/// Each parameter is materialized on first use.
#[derive(Debug)]
pub struct Bound<'a> {
    store: &'a ParamStore,
    vars: BTreeMap<String, Var>,
}

impl<'a> Bound<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Self {
            store,
            vars: BTreeMap::new(),
        }
    }

    pub fn store(&self) -> &'a ParamStore {
        self.store
    }

    /// Leaf for `name`, shaped as a matrix (1-D parameters become rows).
    pub fn var(&mut self, g: &mut Graph, name: &str) -> Var {
        if let Some(&v) = self.vars.get(name) {
            return v;
        }
        let t = self
            .store
            .get(name)
            .unwrap_or_else(|| panic!("parameter `{name}` not in store"));
        let (r, c) = t.matrix_dims();
        let v = g.param(r, c, t.values.clone());
        self.vars.insert(name.to_string(), v);
        v
    }

    /// Gradients for every parameter bound on this graph.
    pub fn collect(&self, grads: &Gradients) -> GradStore {
        let mut out = BTreeMap::new();
        for (name, &v) in &self.vars {
            if let Some(g) = grads.get(v) {
                out.insert(name.clone(), g.to_vec());
            }
        }
        GradStore(out)
    }
}

/// Per-parameter gradients, keyed like the [`ParamStore`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradStore(pub BTreeMap<String, Vec<f64>>);

impl GradStore {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.0.get(name).map(Vec::as_slice)
    }

    /// `self += other`, for accumulating over a minibatch.
    pub fn accumulate(&mut self, other: &GradStore) {
        for (name, g) in &other.0 {
            match self.0.get_mut(name) {
                Some(dst) => {
                    for (d, s) in dst.iter_mut().zip(g) {
                        *d += s;
                    }
                }
                None => {
                    self.0.insert(name.clone(), g.clone());
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.0.values_mut() {
            for v in g.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.0
            .values()
            .flat_map(|g| g.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}
