//! Small fully connected regressor with explicit layer-wise backprop.
//!
//! Parameter layout: one [`Layer`] per affine map, named `dense{k}`. A layer
//! mapping `in → out` holds `out` weight-row filters of shape `[in]` followed
//! by a single bias filter of shape `[out]`. Hidden layers apply the
//! activation; the final layer is linear with a single output.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{self, LossSpec};
use crate::params::{Layer, ParamSet, ParamTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative in terms of the pre-activation `z` and output `a`.
    /// ReLU uses 0 at the kink.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidParameter(format!("unknown activation '{other}'"))),
        }
    }
}

/// Input rows and ground-truth scores for one step or one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    inputs: Vec<f64>,
    dim: usize,
    scores: Vec<f64>,
}

impl Batch {
    /// `inputs` is row-major, `scores.len()` rows of `dim` columns.
    pub fn new(inputs: Vec<f64>, dim: usize, scores: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("input dimension must be positive".into()));
        }
        if inputs.len() != dim * scores.len() {
            return Err(Error::Shape(format!(
                "{} input values do not form {} rows of width {dim}",
                inputs.len(),
                scores.len()
            )));
        }
        Ok(Self { inputs, dim, scores })
    }

    pub fn from_rows(rows: &[Vec<f64>], scores: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("ragged input rows".into()));
        }
        Self::new(rows.concat(), dim, scores)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn inputs_mut(&mut self) -> &mut [f64] {
        &mut self.inputs
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Batch {
        let mut inputs = Vec::with_capacity(indices.len() * self.dim);
        let mut scores = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.extend_from_slice(self.row(i));
            scores.push(self.scores[i]);
        }
        Batch { inputs, dim: self.dim, scores }
    }
}

/// Architecture of a scalar-output MLP. Parameters live in a separate [`ParamSet`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    widths: Vec<usize>,
    activation: Activation,
}

impl Mlp {
    pub fn new(widths: Vec<usize>, activation: Activation) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidParameter("need at least input and output widths".into()));
        }
        if widths.contains(&0) {
            return Err(Error::InvalidParameter(format!("zero width in {widths:?}")));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::InvalidParameter(format!(
                "output width must be 1, got {widths:?}"
            )));
        }
        Ok(Self { widths, activation })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    pub fn layer_name(k: usize) -> String {
        format!("dense{k}")
    }

    pub fn zero_params(&self) -> ParamSet {
        let layers = self
            .widths
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let mut filters: Vec<ParamTensor> =
                    (0..fan_out).map(|_| ParamTensor::zeros(vec![fan_in])).collect();
                filters.push(ParamTensor::zeros(vec![fan_out]));
                Layer::new(Self::layer_name(k), filters)
            })
            .collect();
        ParamSet::new(layers).expect("generated layer names are unique")
    }

    /// Gaussian weights with standard deviation `gain / sqrt(fan_in)` and
    /// Gaussian biases with standard deviation `bias_std`.
    pub fn init_params<R: Rng + ?Sized>(&self, gain: f64, bias_std: f64, rng: &mut R) -> ParamSet {
        let mut p = self.zero_params();
        for (k, layer) in p.layers_mut().iter_mut().enumerate() {
            let std = gain / (self.widths[k] as f64).sqrt();
            let n = layer.filters.len();
            for (j, f) in layer.filters.iter_mut().enumerate() {
                let s = if j + 1 == n { bias_std } else { std };
                for v in f.values_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = s * z;
                }
            }
        }
        p
    }

    /// Default student initialization: He scaling for ReLU, Xavier for tanh, zero biases.
    pub fn default_init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamSet {
        let gain = match self.activation {
            Activation::Relu => 2f64.sqrt(),
            Activation::Tanh => 1.0,
        };
        self.init_params(gain, 0.0, rng)
    }

    pub fn check_params(&self, params: &ParamSet) -> Result<()> {
        self.zero_params().check_congruent(params)
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.dim() != self.input_dim() {
            return Err(Error::Congruence(format!(
                "batch has {} input columns, model expects {}",
                batch.dim(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Pre-activations and activations of every layer for one input row.
    fn trace(&self, params: &ParamSet, x: &[f64], zs: &mut Vec<Vec<f64>>, acts: &mut Vec<Vec<f64>>) {
        zs.clear();
        acts.clear();
        acts.push(x.to_vec());
        let last = self.num_layers() - 1;
        for (k, layer) in params.layers().iter().enumerate() {
            let input = &acts[k];
            let out = layer.filters.len() - 1;
            let bias = layer.filters[out].values();
            let z: Vec<f64> = (0..out)
                .map(|j| {
                    let row = layer.filters[j].values();
                    let mut s = bias[j];
                    for (w, a) in row.iter().zip(input) {
                        s += w * a;
                    }
                    s
                })
                .collect();
            let a = if k == last {
                z.clone()
            } else {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            };
            zs.push(z);
            acts.push(a);
        }
    }

    /// Scalar prediction for every row of `batch`.
    pub fn forward(&self, params: &ParamSet, batch: &Batch) -> Result<Vec<f64>> {
        self.check_params(params)?;
        self.check_batch(batch)?;
        Ok(self.forward_unchecked(params, batch))
    }

    fn forward_unchecked(&self, params: &ParamSet, batch: &Batch) -> Vec<f64> {
        let mut zs = Vec::new();
        let mut acts = Vec::new();
        (0..batch.len())
            .map(|i| {
                self.trace(params, batch.row(i), &mut zs, &mut acts);
                acts.last().unwrap()[0]
            })
            .collect()
    }

    /// Every hidden-layer pre-activation for every row, flattened.
    pub fn hidden_preactivations(&self, params: &ParamSet, batch: &Batch) -> Result<Vec<f64>> {
        self.check_params(params)?;
        self.check_batch(batch)?;
        let mut zs = Vec::new();
        let mut acts = Vec::new();
        let mut out = Vec::new();
        for i in 0..batch.len() {
            self.trace(params, batch.row(i), &mut zs, &mut acts);
            for z in &zs[..zs.len() - 1] {
                out.extend_from_slice(z);
            }
        }
        Ok(out)
    }

    /// Batch loss at `params`, including the explicit L2 term.
    pub fn loss(&self, params: &ParamSet, batch: &Batch, spec: &LossSpec) -> Result<f64> {
        let pred = self.forward(params, batch)?;
        Ok(losses::combined_loss(spec, &pred, batch.scores())? + losses::l2_penalty(params, spec.l2_lambda))
    }

    /// Loss value and its exact gradient with respect to every parameter.
    pub fn loss_and_grad(
        &self,
        params: &ParamSet,
        batch: &Batch,
        spec: &LossSpec,
    ) -> Result<(f64, ParamSet)> {
        self.check_params(params)?;
        self.check_batch(batch)?;
        let pred = self.forward_unchecked(params, batch);
        let (base, dpred) = losses::combined_loss_grad(spec, &pred, batch.scores())?;
        let mut grad = self.backward(params, batch, &dpred);
        let loss = base + losses::l2_penalty(params, spec.l2_lambda);
        if spec.l2_lambda != 0.0 {
            grad = grad.axpy(2.0 * spec.l2_lambda, params)?;
        }
        Ok((loss, grad))
    }

    /// Pulls `dpred` (one entry per row) back to the parameters. Rows are
    /// accumulated in index order so the reduction is deterministic.
    fn backward(&self, params: &ParamSet, batch: &Batch, dpred: &[f64]) -> ParamSet {
        let mut grad = params.zeros_like();
        let mut zs = Vec::new();
        let mut acts = Vec::new();
        let nl = self.num_layers();
        for (i, &dp) in dpred.iter().enumerate() {
            if dp == 0.0 {
                continue;
            }
            self.trace(params, batch.row(i), &mut zs, &mut acts);
            let mut delta = vec![dp];
            for k in (0..nl).rev() {
                let layer = &params.layers()[k];
                let input = &acts[k];
                let out = delta.len();
                {
                    let glayer = &mut grad.layers_mut()[k];
                    for j in 0..out {
                        let d = delta[j];
                        if d == 0.0 {
                            continue;
                        }
                        for (g, a) in glayer.filters[j].values_mut().iter_mut().zip(input) {
                            *g += d * a;
                        }
                        glayer.filters[out].values_mut()[j] += d;
                    }
                }
                if k == 0 {
                    break;
                }
                let mut prev = vec![0.0; input.len()];
                for j in 0..out {
                    let d = delta[j];
                    if d == 0.0 {
                        continue;
                    }
                    for (p, w) in prev.iter_mut().zip(layer.filters[j].values()) {
                        *p += d * w;
                    }
                }
                let z_prev = &zs[k - 1];
                for ((p, &z), &a) in prev.iter_mut().zip(z_prev).zip(input) {
                    *p *= self.activation.derivative(z, a);
                }
                delta = prev;
            }
        }
        grad
    }
}

/// A differentiable scalar function of a parameter set.
///
/// The perturbation and landscape routines are written against this trait so
/// they can run on the MLP batch loss or on closed-form toy objectives.
pub trait Objective {
    fn loss(&self, params: &ParamSet) -> Result<f64>;
    fn loss_and_grad(&self, params: &ParamSet) -> Result<(f64, ParamSet)>;
}

/// The MLP batch loss as an [`Objective`].
#[derive(Debug, Clone, Copy)]
pub struct BatchObjective<'a> {
    pub mlp: &'a Mlp,
    pub batch: &'a Batch,
    pub spec: &'a LossSpec,
}

impl<'a> BatchObjective<'a> {
    pub fn new(mlp: &'a Mlp, batch: &'a Batch, spec: &'a LossSpec) -> Self {
        Self { mlp, batch, spec }
    }
}

impl Objective for BatchObjective<'_> {
    fn loss(&self, params: &ParamSet) -> Result<f64> {
        self.mlp.loss(params, self.batch, self.spec)
    }

    fn loss_and_grad(&self, params: &ParamSet) -> Result<(f64, ParamSet)> {
        self.mlp.loss_and_grad(params, self.batch, self.spec)
    }
}

/// An MLP together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub mlp: Mlp,
    pub params: ParamSet,
}

impl MlpModel {
    pub fn new(mlp: Mlp, params: ParamSet) -> Result<Self> {
        mlp.check_params(&params)?;
        Ok(Self { mlp, params })
    }

    pub fn predict(&self, batch: &Batch) -> Result<Vec<f64>> {
        self.mlp.forward(&self.params, batch)
    }
}
