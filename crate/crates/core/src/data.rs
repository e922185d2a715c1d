//! Train/test datasets and the teacher–student synthetic task.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Activation, Batch, Mlp};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Batch,
    pub test: Batch,
}

/// Labels come from a fixed random teacher network plus Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub input_dim: usize,
    /// Teacher widths, input first, 1 last.
    pub teacher_widths: Vec<usize>,
    pub teacher_activation: Activation,
    pub teacher_seed: u64,
    /// Weight standard deviation is `teacher_gain / sqrt(fan_in)`.
    pub teacher_gain: f64,
    pub label_noise_sigma: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_train: 200,
            n_test: 2000,
            input_dim: 16,
            teacher_widths: vec![16, 32, 32, 1],
            teacher_activation: Activation::Relu,
            teacher_seed: 1234,
            teacher_gain: 1.0,
            label_noise_sigma: 0.3,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::InvalidParameter("n_train and n_test must be positive".into()));
        }
        if self.input_dim == 0 {
            return Err(Error::InvalidParameter("input_dim must be positive".into()));
        }
        if self.teacher_widths.first() != Some(&self.input_dim) {
            return Err(Error::InvalidParameter(format!(
                "teacher input width {:?} does not match input_dim {}",
                self.teacher_widths.first(),
                self.input_dim
            )));
        }
        if !(self.label_noise_sigma >= 0.0) || !(self.teacher_gain > 0.0) {
            return Err(Error::InvalidParameter(
                "label_noise_sigma must be >= 0 and teacher_gain > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn teacher(&self) -> Result<(Mlp, crate::params::ParamSet)> {
        let mlp = Mlp::new(self.teacher_widths.clone(), self.teacher_activation)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.teacher_seed);
        let params = mlp.init_params(self.teacher_gain, 0.1, &mut rng);
        Ok((mlp, params))
    }
}

/// Draws `n` standard-Gaussian rows and labels them with the teacher.
fn draw(spec: &SyntheticSpec, mlp: &Mlp, params: &crate::params::ParamSet, n: usize, rng: &mut ChaCha8Rng) -> Result<Batch> {
    let inputs: Vec<f64> = (0..n * spec.input_dim).map(|_| StandardNormal.sample(rng)).collect();
    let unlabeled = Batch::new(inputs.clone(), spec.input_dim, vec![0.0; n])?;
    let clean = mlp.forward(params, &unlabeled)?;
    let scores = clean
        .into_iter()
        .map(|y| {
            let e: f64 = StandardNormal.sample(rng);
            y + spec.label_noise_sigma * e
        })
        .collect();
    Batch::new(inputs, spec.input_dim, scores)
}

/// Teacher weights depend only on `spec.teacher_seed`; samples depend only on
/// `seed`, with train and test drawn from separate streams.
pub fn synthesize(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let (mlp, params) = spec.teacher()?;
    let mut train_rng = ChaCha8Rng::seed_from_u64(seed);
    train_rng.set_stream(1);
    let mut test_rng = ChaCha8Rng::seed_from_u64(seed);
    test_rng.set_stream(2);
    Ok(Dataset {
        train: draw(spec, &mlp, &params, spec.n_train, &mut train_rng)?,
        test: draw(spec, &mlp, &params, spec.n_test, &mut test_rng)?,
    })
}

/// Seeded shuffle, then the first `round(n · train_fraction)` rows go to train.
pub fn split(all: &Batch, train_fraction: f64, seed: u64) -> Result<Dataset> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n = all.len();
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::DegenerateBatch(format!(
            "{n} rows cannot be split {train_fraction} / {}",
            1.0 - train_fraction
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Dataset { train: all.select(&idx[..n_train]), test: all.select(&idx[n_train..]) })
}
