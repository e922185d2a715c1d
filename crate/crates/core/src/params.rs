//! Hierarchical dense parameter container.
//!
//! A [`ParamSet`] is an ordered list of named layers, each holding an ordered
//! list of filters ([`ParamTensor`]). Weights, gradients, perturbations and
//! landscape directions are all congruent `ParamSet`s, so every piece of the
//! training and probing machinery is written as arithmetic on this one type.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl ParamTensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Shape(format!("shape {shape:?} must be non-empty and positive")));
        }
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {n} values, got {}",
                values.len()
            )));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, values: vec![0.0; n] }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { shape: vec![values.len()], values }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.sq_norm().sqrt()
    }

    pub fn sq_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub filters: Vec<ParamTensor>,
}

impl Layer {
    pub fn new(name: impl Into<String>, filters: Vec<ParamTensor>) -> Self {
        Self { name: name.into(), filters }
    }

    pub fn sq_norm(&self) -> f64 {
        self.filters.iter().map(ParamTensor::sq_norm).sum()
    }

    pub fn norm(&self) -> f64 {
        self.sq_norm().sqrt()
    }

    pub fn num_values(&self) -> usize {
        self.filters.iter().map(ParamTensor::len).sum()
    }

    fn scale_in_place(&mut self, factor: f64) {
        for f in &mut self.filters {
            for v in f.values_mut() {
                *v *= factor;
            }
        }
    }

    fn fill_zero(&mut self) {
        for f in &mut self.filters {
            f.values_mut().fill(0.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamSet {
    layers: Vec<Layer>,
}

impl ParamSet {
    /// Builds a set, rejecting duplicate layer names.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        for (i, l) in layers.iter().enumerate() {
            if layers[..i].iter().any(|o| o.name == l.name) {
                return Err(Error::InvalidParameter(format!("duplicate layer name '{}'", l.name)));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn num_values(&self) -> usize {
        self.layers.iter().map(Layer::num_values).sum()
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|_| 0.0)
    }

    /// Same structure, every value filled with `value`.
    pub fn filled_like(&self, value: f64) -> Self {
        self.map(|_| value)
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                name: l.name.clone(),
                filters: l
                    .filters
                    .iter()
                    .map(|t| ParamTensor {
                        shape: t.shape.clone(),
                        values: t.values.iter().map(|&v| f(v)).collect(),
                    })
                    .collect(),
            })
            .collect();
        Self { layers }
    }

    pub fn is_congruent(&self, other: &ParamSet) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.filters.len() == b.filters.len()
                    && a.filters.iter().zip(&b.filters).all(|(x, y)| x.shape == y.shape)
            })
    }

    pub fn check_congruent(&self, other: &ParamSet) -> Result<()> {
        if self.is_congruent(other) {
            Ok(())
        } else {
            Err(Error::Congruence(format!(
                "{} layers / {} values vs {} layers / {} values",
                self.layers.len(),
                self.num_values(),
                other.layers.len(),
                other.num_values()
            )))
        }
    }

    /// Element-wise `f(self, other)` over congruent sets.
    pub fn zip_map(&self, other: &ParamSet, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        self.check_congruent(other)?;
        let layers = self
            .layers
            .iter()
            .zip(&other.layers)
            .map(|(a, b)| Layer {
                name: a.name.clone(),
                filters: a
                    .filters
                    .iter()
                    .zip(&b.filters)
                    .map(|(x, y)| ParamTensor {
                        shape: x.shape.clone(),
                        values: x.values.iter().zip(&y.values).map(|(&u, &v)| f(u, v)).collect(),
                    })
                    .collect(),
            })
            .collect();
        Ok(Self { layers })
    }

    /// `y + a·x`, returning a new set. `self` plays the role of `y`.
    pub fn axpy(&self, a: f64, x: &ParamSet) -> Result<Self> {
        self.zip_map(x, |y, x| y + a * x)
    }

    pub fn add(&self, other: &ParamSet) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ParamSet) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn dot(&self, other: &ParamSet) -> Result<f64> {
        self.check_congruent(other)?;
        Ok(crate::sum::sum(
            self.iter_values().zip(other.iter_values()).map(|(a, b)| a * b),
        ))
    }

    pub fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.filters.iter().flat_map(|f| f.values.iter().copied()))
    }

    /// Flattens in layer, filter, row-major order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.iter_values().collect()
    }

    /// Inverse of [`ParamSet::to_flat`] using `self` as the structural template.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.num_values() {
            return Err(Error::Congruence(format!(
                "flat vector has {} values, set has {}",
                flat.len(),
                self.num_values()
            )));
        }
        let mut it = flat.iter().copied();
        Ok(self.map(|_| it.next().unwrap_or(0.0)))
    }

    pub fn all_finite(&self) -> bool {
        self.iter_values().all(f64::is_finite)
    }

    pub fn scale_layer(&mut self, layer: usize, factor: f64) {
        self.layers[layer].scale_in_place(factor);
    }

    pub fn zero_layer(&mut self, layer: usize) {
        self.layers[layer].fill_zero();
    }
}

/// Frobenius norm of every filter, grouped by layer.
pub fn filter_norms(p: &ParamSet) -> Vec<Vec<f64>> {
    p.layers.iter().map(|l| l.filters.iter().map(ParamTensor::norm).collect()).collect()
}

pub fn layer_norms(p: &ParamSet) -> Vec<f64> {
    p.layers.iter().map(Layer::norm).collect()
}

pub fn global_norm(p: &ParamSet) -> f64 {
    p.layers.iter().map(Layer::sq_norm).sum::<f64>().sqrt()
}

/// `y + a·x`.
pub fn axpy(a: f64, x: &ParamSet, y: &ParamSet) -> Result<ParamSet> {
    y.axpy(a, x)
}
