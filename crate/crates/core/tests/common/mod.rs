#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sharpkit::{Activation, Batch, Mlp, ParamSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// A small random MLP (at most 200 parameters) with random weights and biases.
pub fn small_model(rng: &mut impl Rng) -> (Mlp, ParamSet) {
    let act = if rng.random_bool(0.5) { Activation::Relu } else { Activation::Tanh };
    let input = rng.random_range(2..=5);
    let h1 = rng.random_range(2..=8);
    let mut widths = vec![input, h1];
    if rng.random_bool(0.5) {
        widths.push(rng.random_range(2..=6));
    }
    widths.push(1);
    let mlp = Mlp::new(widths, act).unwrap();
    assert!(mlp.num_params() <= 200);
    let params = mlp.init_params(1.2, 0.3, rng);
    (mlp, params)
}

pub fn random_batch(rng: &mut impl Rng, m: usize, dim: usize) -> Batch {
    let inputs = gaussian_vec(rng, m * dim);
    let scores = gaussian_vec(rng, m);
    Batch::new(inputs, dim, scores).unwrap()
}
