//! Weight perturbation: random (RWP) and adversarial (AWP) perturbations
//! under a layer-wise relative norm bound, and the perturbed training step.
//!
//! Both perturbation kinds respect `‖ε_l‖ ≤ γ·‖w_l‖` for every layer `l`.
//! RWP draws a Gaussian direction and places it exactly on that boundary.
//! AWP starts from `ε = 0` and takes `K` normalized gradient-ascent steps,
//! projecting back onto the bound after each one.

mod optim;
mod train;

pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use train::{
    init_model, train, train_step, EpochRecord, StepMetrics, StepRecord, TrainConfig,
    TrainedResult,
};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Objective;
use crate::params::{layer_norms, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    None,
    Rwp,
    Awp,
}

impl PerturbMode {
    pub fn name(self) -> &'static str {
        match self {
            PerturbMode::None => "none",
            PerturbMode::Rwp => "rwp",
            PerturbMode::Awp => "awp",
        }
    }
}

impl std::str::FromStr for PerturbMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "vanilla" => Ok(PerturbMode::None),
            "rwp" => Ok(PerturbMode::Rwp),
            "awp" => Ok(PerturbMode::Awp),
            other => Err(Error::InvalidParameter(format!("unknown perturbation mode '{other}'"))),
        }
    }
}

/// How the AWP ascent step normalizes the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AscentNorm {
    /// `ε_l += η₂ · g_l/‖g_l‖ · ‖w_l‖`
    Layer,
    /// `ε += η₂ · g/‖g‖ · ‖w‖`, using whole-network norms.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    pub mode: PerturbMode,
    /// Relative magnitude bound γ.
    pub gamma: f64,
    /// Ascent steps K (AWP only).
    pub steps: usize,
    /// Ascent step size η₂ (AWP only).
    pub eta2: f64,
    pub ascent_norm: AscentNorm,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self { mode: PerturbMode::None, gamma: 0.0, steps: 1, eta2: 1.0, ascent_norm: AscentNorm::Layer }
    }
}

impl PerturbConfig {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn rwp(gamma: f64) -> Self {
        Self { mode: PerturbMode::Rwp, gamma, ..Self::default() }
    }

    pub fn awp(gamma: f64) -> Self {
        Self { mode: PerturbMode::Awp, gamma, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == PerturbMode::None {
            return Ok(());
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.mode == PerturbMode::Awp {
            if self.steps == 0 {
                return Err(Error::InvalidParameter("AWP needs at least one ascent step".into()));
            }
            if !(self.eta2 > 0.0 && self.eta2.is_finite()) {
                return Err(Error::InvalidParameter(format!("eta2 must be > 0, got {}", self.eta2)));
            }
        }
        Ok(())
    }
}

/// Gaussian perturbation rescaled so every layer sits exactly at `γ·‖w_l‖`.
pub fn sample_rwp<R: Rng + ?Sized>(w: &ParamSet, gamma: f64, rng: &mut R) -> ParamSet {
    let mut eps = w.map(|_| StandardNormal.sample(rng));
    let w_norms = layer_norms(w);
    let raw_norms = layer_norms(&eps);
    for (l, (&wn, &rn)) in w_norms.iter().zip(&raw_norms).enumerate() {
        let target = gamma * wn;
        if target == 0.0 || rn == 0.0 {
            eps.zero_layer(l);
        } else {
            eps.scale_layer(l, target / rn);
        }
    }
    eps
}

/// Scales each layer of `eps` back onto `‖ε_l‖ ≤ γ·‖w_l‖` where it is outside.
///
/// Idempotent: the scale factor is nudged down until the rescaled layer norm
/// is at or below the bound in floating point, so a second projection is a
/// no-op.
pub fn project(eps: &ParamSet, w: &ParamSet, gamma: f64) -> Result<ParamSet> {
    eps.check_congruent(w)?;
    let mut out = eps.clone();
    let w_norms = layer_norms(w);
    for l in 0..out.layers().len() {
        let bound = gamma * w_norms[l];
        let n = out.layers()[l].norm();
        if !n.is_finite() || !bound.is_finite() {
            return Err(Error::NonFinite(format!("layer {l} norm while projecting")));
        }
        if n <= bound {
            continue;
        }
        if bound == 0.0 {
            out.zero_layer(l);
            continue;
        }
        let original = out.layers()[l].clone();
        let mut factor = bound / n;
        loop {
            out.layers_mut()[l] = original.clone();
            out.scale_layer(l, factor);
            if out.layers()[l].norm() <= bound {
                break;
            }
            factor = factor.next_down();
        }
    }
    Ok(out)
}

/// Result of [`awp_ascent`].
#[derive(Debug, Clone, PartialEq)]
pub struct Ascent {
    pub eps: ParamSet,
    /// Loss at every point where a gradient was taken: `w + ε_0 = w`, then
    /// `w + ε_1`, …, `w + ε_{K−1}`.
    pub losses: Vec<f64>,
}

/// Projected, normalized gradient ascent on `ε` starting from zero.
pub fn awp_ascent<O: Objective + ?Sized>(objective: &O, w: &ParamSet, cfg: &PerturbConfig) -> Result<Ascent> {
    if cfg.steps == 0 {
        return Err(Error::InvalidParameter("AWP needs at least one ascent step".into()));
    }
    let mut eps = w.zeros_like();
    let mut losses = Vec::with_capacity(cfg.steps);
    let w_norms = layer_norms(w);
    let w_global = crate::params::global_norm(w);
    for _ in 0..cfg.steps {
        // The gradient with respect to ε equals the weight gradient at w + ε.
        let (loss, g) = objective.loss_and_grad(&w.add(&eps)?)?;
        losses.push(loss);
        match cfg.ascent_norm {
            AscentNorm::Layer => {
                let g_norms = layer_norms(&g);
                let mut step = g.clone();
                for l in 0..step.layers().len() {
                    if g_norms[l] == 0.0 {
                        step.zero_layer(l);
                    } else {
                        step.scale_layer(l, cfg.eta2 * w_norms[l] / g_norms[l]);
                    }
                }
                eps = eps.add(&step)?;
            }
            AscentNorm::Global => {
                let gn = crate::params::global_norm(&g);
                if gn > 0.0 {
                    eps = eps.axpy(cfg.eta2 * w_global / gn, &g)?;
                }
            }
        }
        eps = project(&eps, w, cfg.gamma)?;
    }
    Ok(Ascent { eps, losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{Layer, ParamTensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_set(seed: u64) -> ParamSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = (0..3)
            .map(|l| {
                let f = (0..3)
                    .map(|_| ParamTensor::from_vec((0..4).map(|_| rng.random_range(-1.0..1.0)).collect()))
                    .collect();
                Layer::new(format!("l{l}"), f)
            })
            .collect();
        ParamSet::new(layers).unwrap()
    }

    #[test]
    fn rwp_zero_gamma_is_zero() {
        let w = random_set(1);
        let eps = sample_rwp(&w, 0.0, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(eps.iter_values().all(|v| v == 0.0 && v.is_sign_positive()));
    }

    #[test]
    fn rwp_layer_ratio_is_gamma() {
        let w = random_set(3);
        for gamma in [1e-4, 0.01, 0.5] {
            let eps = sample_rwp(&w, gamma, &mut ChaCha8Rng::seed_from_u64(4));
            for (e, wn) in layer_norms(&eps).iter().zip(layer_norms(&w)) {
                assert!((e / wn - gamma).abs() <= 1e-12 * gamma);
            }
        }
    }

    #[test]
    fn rwp_is_reproducible() {
        let w = random_set(5);
        let a = sample_rwp(&w, 0.1, &mut ChaCha8Rng::seed_from_u64(6));
        let b = sample_rwp(&w, 0.1, &mut ChaCha8Rng::seed_from_u64(6));
        assert!(a.iter_values().zip(b.iter_values()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn project_examples() {
        let w = random_set(7);
        let gamma = 0.1;
        let inside = sample_rwp(&w, gamma / 2.0, &mut ChaCha8Rng::seed_from_u64(8));
        assert_eq!(project(&inside, &w, gamma).unwrap(), inside);

        let outside = sample_rwp(&w, 2.0 * gamma, &mut ChaCha8Rng::seed_from_u64(9));
        let p = project(&outside, &w, gamma).unwrap();
        for (pn, wn) in layer_norms(&p).iter().zip(layer_norms(&w)) {
            assert!(*pn <= gamma * wn);
            assert!((pn - gamma * wn).abs() <= 1e-12 * gamma * wn);
        }
        let pp = project(&p, &w, gamma).unwrap();
        assert!(pp.iter_values().zip(p.iter_values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn project_to_zero_ball() {
        let w = random_set(10);
        let eps = random_set(11);
        let p = project(&eps, &w, 0.0).unwrap();
        assert!(p.iter_values().all(|v| v == 0.0));
    }

    #[test]
    fn project_rejects_non_finite_norms() {
        let w = random_set(1);
        let eps = random_set(2).map(|v| v * f64::MAX);
        assert!(matches!(project(&eps, &w, 0.1), Err(Error::NonFinite(_))));
        let nan = random_set(3).map(|_| f64::NAN);
        assert!(project(&nan, &w, 0.1).is_err());
    }

    #[test]
    fn project_rejects_incongruent() {
        let w = random_set(1);
        let other = ParamSet::new(vec![Layer::new("x", vec![ParamTensor::from_vec(vec![1.0])])]).unwrap();
        assert!(project(&other, &w, 0.1).is_err());
    }

    #[test]
    fn validate_config() {
        assert!(PerturbConfig { steps: 0, ..PerturbConfig::awp(0.1) }.validate().is_err());
        assert!(PerturbConfig { eta2: 0.0, ..PerturbConfig::awp(0.1) }.validate().is_err());
        assert!(PerturbConfig::rwp(-1.0).validate().is_err());
        assert!(PerturbConfig { gamma: -1.0, ..PerturbConfig::none() }.validate().is_ok());
    }
}
