//! Batch-level quality-regression losses.
//!
//! Every loss here is a function of the whole mini-batch of predictions and
//! ground-truth scores. Each `*_grad` variant returns the loss value together
//! with its gradient with respect to the prediction vector; the model's
//! backward pass chains from there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::sum::{self, Neumaier};

/// Added to each centered-vector norm in the PLCC loss denominator.
pub const PLCC_NORM_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `ℓ_PLCC + β·ℓ_RANK`
    PlccRank,
    /// `ℓ_MAE + λ_RANK·ℓ_RANK`
    MaeRank,
    Mae,
    SmoothL1,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::PlccRank => "plcc_rank",
            LossKind::MaeRank => "mae_rank",
            LossKind::Mae => "mae",
            LossKind::SmoothL1 => "smooth_l1",
        }
    }

    /// Smallest batch the loss is defined on.
    pub fn min_batch(self) -> usize {
        match self {
            LossKind::PlccRank | LossKind::MaeRank => 2,
            LossKind::Mae | LossKind::SmoothL1 => 1,
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plcc_rank" => Ok(LossKind::PlccRank),
            "mae_rank" => Ok(LossKind::MaeRank),
            "mae" => Ok(LossKind::Mae),
            "smooth_l1" => Ok(LossKind::SmoothL1),
            other => Err(Error::InvalidParameter(format!("unknown loss kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Weight of the RANK term for `plcc_rank`.
    pub beta: f64,
    /// Weight of the RANK term for `mae_rank`.
    pub lambda_rank: f64,
    /// Explicit L2 penalty coefficient, added on top of the batch loss.
    pub l2_lambda: f64,
    pub smooth_l1_delta: f64,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self {
            kind: LossKind::PlccRank,
            beta: 0.3,
            lambda_rank: 0.5,
            l2_lambda: 0.0,
            smooth_l1_delta: 1.0,
        }
    }
}

impl LossSpec {
    pub fn of_kind(kind: LossKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        ok("beta", self.beta)?;
        ok("lambda_rank", self.lambda_rank)?;
        ok("l2_lambda", self.l2_lambda)?;
        if !(self.smooth_l1_delta > 0.0 && self.smooth_l1_delta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "smooth_l1_delta must be > 0, got {}",
                self.smooth_l1_delta
            )));
        }
        Ok(())
    }
}

fn check_pair(pred: &[f64], scores: &[f64], min_len: usize, what: &str) -> Result<()> {
    if pred.len() != scores.len() {
        return Err(Error::Shape(format!(
            "{what}: {} predictions vs {} scores",
            pred.len(),
            scores.len()
        )));
    }
    if pred.len() < min_len {
        return Err(Error::DegenerateBatch(format!(
            "{what} needs at least {min_len} samples, got {}",
            pred.len()
        )));
    }
    Ok(())
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn centered(v: &[f64]) -> Vec<f64> {
    let m = sum::mean(v);
    v.iter().map(|x| x - m).collect()
}

/// `(1 − r)/2` with `r` the guarded Pearson correlation of the batch.
pub fn plcc_loss(pred: &[f64], scores: &[f64]) -> Result<f64> {
    plcc_loss_grad(pred, scores).map(|(l, _)| l)
}

pub fn plcc_loss_grad(pred: &[f64], scores: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_pair(pred, scores, 2, "plcc_loss")?;
    let a = centered(pred);
    let b = centered(scores);
    let a_norm = sum::dot(&a, &a).sqrt();
    let na = a_norm + PLCC_NORM_GUARD;
    let nb = sum::dot(&b, &b).sqrt() + PLCC_NORM_GUARD;
    let ab = sum::dot(&a, &b);
    let r = ab / (na * nb);
    let loss = (1.0 - r) / 2.0;

    // dr/da = b/(na·nb) − (a·b)/(na²·nb) · a/‖a‖; both terms are already
    // centered, so this is also dr/dpred.
    let radial = if a_norm > 0.0 { ab / (na * na * nb * a_norm) } else { 0.0 };
    let grad = a
        .iter()
        .zip(&b)
        .map(|(ai, bi)| -0.5 * (bi / (na * nb) - radial * ai))
        .collect();
    Ok((loss, grad))
}

/// Hinge penalty summed over all ordered pairs `(i, j)`, `i ≠ j`.
///
/// Not normalized by the pair count, so its scale grows with the batch size.
pub fn rank_loss(pred: &[f64], scores: &[f64]) -> Result<f64> {
    check_pair(pred, scores, 2, "rank_loss")?;
    let mut acc = Neumaier::new();
    for i in 0..pred.len() {
        for j in 0..pred.len() {
            if i != j {
                acc.add(((pred[i] - pred[j]) * sgn(scores[j] - scores[i])).max(0.0));
            }
        }
    }
    Ok(acc.total())
}

pub fn rank_loss_grad(pred: &[f64], scores: &[f64]) -> Result<(f64, Vec<f64>)> {
    let loss = rank_loss(pred, scores)?;
    let n = pred.len();
    let mut grad = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let s = sgn(scores[j] - scores[i]);
            // Subgradient 0 at the hinge.
            if (pred[i] - pred[j]) * s > 0.0 {
                grad[i] += s;
                grad[j] -= s;
            }
        }
    }
    Ok((loss, grad))
}

pub fn mae_loss(pred: &[f64], scores: &[f64]) -> Result<f64> {
    check_pair(pred, scores, 1, "mae_loss")?;
    Ok(sum::sum(pred.iter().zip(scores).map(|(p, s)| (p - s).abs())) / pred.len() as f64)
}

pub fn mae_loss_grad(pred: &[f64], scores: &[f64]) -> Result<(f64, Vec<f64>)> {
    let loss = mae_loss(pred, scores)?;
    let n = pred.len() as f64;
    let grad = pred.iter().zip(scores).map(|(p, s)| sgn(p - s) / n).collect();
    Ok((loss, grad))
}

fn huber(e: f64, delta: f64) -> f64 {
    let a = e.abs();
    if a <= delta {
        0.5 * e * e / delta
    } else {
        a - 0.5 * delta
    }
}

pub fn smooth_l1_loss(pred: &[f64], scores: &[f64], delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("smooth_l1 delta must be > 0, got {delta}")));
    }
    check_pair(pred, scores, 1, "smooth_l1_loss")?;
    Ok(sum::sum(pred.iter().zip(scores).map(|(p, s)| huber(p - s, delta))) / pred.len() as f64)
}

pub fn smooth_l1_loss_grad(pred: &[f64], scores: &[f64], delta: f64) -> Result<(f64, Vec<f64>)> {
    let loss = smooth_l1_loss(pred, scores, delta)?;
    let n = pred.len() as f64;
    let grad = pred
        .iter()
        .zip(scores)
        .map(|(p, s)| {
            let e = p - s;
            if e.abs() <= delta {
                e / delta / n
            } else {
                sgn(e) / n
            }
        })
        .collect();
    Ok((loss, grad))
}

/// Weighted batch loss selected by `spec.kind`, without the L2 term.
pub fn combined_loss(spec: &LossSpec, pred: &[f64], scores: &[f64]) -> Result<f64> {
    match spec.kind {
        LossKind::PlccRank => {
            let plcc = plcc_loss(pred, scores)?;
            if spec.beta == 0.0 {
                return Ok(plcc);
            }
            Ok(plcc + spec.beta * rank_loss(pred, scores)?)
        }
        LossKind::MaeRank => {
            let mae = mae_loss(pred, scores)?;
            if spec.lambda_rank == 0.0 {
                return Ok(mae);
            }
            Ok(mae + spec.lambda_rank * rank_loss(pred, scores)?)
        }
        LossKind::Mae => mae_loss(pred, scores),
        LossKind::SmoothL1 => smooth_l1_loss(pred, scores, spec.smooth_l1_delta),
    }
}

/// [`combined_loss`] together with its gradient with respect to `pred`.
pub fn combined_loss_grad(spec: &LossSpec, pred: &[f64], scores: &[f64]) -> Result<(f64, Vec<f64>)> {
    let weighted = |(base, mut g): (f64, Vec<f64>), weight: f64| -> Result<(f64, Vec<f64>)> {
        if weight == 0.0 {
            return Ok((base, g));
        }
        let (r, rg) = rank_loss_grad(pred, scores)?;
        for (gi, ri) in g.iter_mut().zip(rg) {
            *gi += weight * ri;
        }
        Ok((base + weight * r, g))
    };
    match spec.kind {
        LossKind::PlccRank => weighted(plcc_loss_grad(pred, scores)?, spec.beta),
        LossKind::MaeRank => weighted(mae_loss_grad(pred, scores)?, spec.lambda_rank),
        LossKind::Mae => mae_loss_grad(pred, scores),
        LossKind::SmoothL1 => smooth_l1_loss_grad(pred, scores, spec.smooth_l1_delta),
    }
}

/// `λ · Σ w²` over every parameter.
pub fn l2_penalty(params: &ParamSet, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    lambda * sum::sum(params.iter_values().map(|v| v * v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{global_norm, Layer, ParamTensor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for (a, b) in x.iter().zip(y) {
            sxy += (a - mx) * (b - my);
            sxx += (a - mx) * (a - mx);
            syy += (b - my) * (b - my);
        }
        sxy / (sxx.sqrt() * syy.sqrt())
    }

    #[test]
    fn plcc_loss_examples() {
        let s = [0.3, 1.2, -0.7, 2.0];
        assert!(plcc_loss(&s, &s).unwrap().abs() < 1e-10);
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        assert!((plcc_loss(&neg, &s).unwrap() - 1.0).abs() < 1e-10);
        let expected = (1.0 - pearson_oracle(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0])) / 2.0;
        assert!((plcc_loss(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap() - expected).abs() < 1e-12);
        // r = -0.5 for this pair
        assert!((expected - 0.75).abs() < 1e-12);
    }

    #[test]
    fn plcc_loss_constant_batch_is_half() {
        assert_eq!(plcc_loss(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.5);
        let (_, g) = plcc_loss_grad(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(g.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn plcc_gradient_vanishes_at_perfect_correlation() {
        let s = [0.1, 0.9, -1.4, 0.35, 2.2];
        let p: Vec<f64> = s.iter().map(|v| 3.0 * v - 1.0).collect();
        let (l, g) = plcc_loss_grad(&p, &s).unwrap();
        assert!(l.abs() < 1e-12);
        assert!(g.iter().all(|v| v.abs() < 1e-8), "{g:?}");
    }

    #[test]
    fn degenerate_batches_error() {
        assert!(matches!(plcc_loss(&[1.0], &[1.0]), Err(Error::DegenerateBatch(_))));
        assert!(matches!(rank_loss(&[1.0], &[1.0]), Err(Error::DegenerateBatch(_))));
        assert!(matches!(mae_loss(&[], &[]), Err(Error::DegenerateBatch(_))));
        assert!(matches!(mae_loss(&[1.0, 2.0], &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn rank_loss_examples() {
        assert_eq!(rank_loss(&[1.0, 2.0, 5.0], &[0.1, 0.2, 0.3]).unwrap(), 0.0);
        assert_eq!(rank_loss(&[4.0, -1.0, 9.0], &[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(rank_loss(&[2.0, 1.0], &[1.0, 2.0]).unwrap(), 2.0);
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae_loss(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut direct = 0.0;
        for i in 0..16 {
            direct += (p[i] - s[i]).abs();
        }
        assert!((mae_loss(&p, &s).unwrap() - direct / 16.0).abs() < 1e-15);
    }

    #[test]
    fn smooth_l1_examples() {
        assert_eq!(smooth_l1_loss(&[1.0, 2.0], &[1.0, 2.0], 1.0).unwrap(), 0.0);
        let delta = 0.7;
        let at = smooth_l1_loss(&[delta], &[0.0], delta).unwrap();
        assert_eq!(at, 0.5 * delta);
        assert_eq!(at, delta - 0.5 * delta);
        assert_eq!(smooth_l1_loss(&[2.0], &[0.0], 1.0).unwrap(), 1.5);
        assert!(matches!(smooth_l1_loss(&[1.0], &[0.0], 0.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn combined_examples() {
        let s = [0.5, 1.0, 1.5];
        let spec = LossSpec { beta: 0.0, ..LossSpec::of_kind(LossKind::PlccRank) };
        assert!(combined_loss(&spec, &s, &s).unwrap().abs() < 1e-10);
        let spec = LossSpec { beta: 1.0, ..LossSpec::of_kind(LossKind::PlccRank) };
        let v = combined_loss(&spec, &[2.0, 1.0], &[1.0, 2.0]).unwrap();
        assert!((v - 3.0).abs() < 1e-10);
        let spec = LossSpec { lambda_rank: 0.0, ..LossSpec::of_kind(LossKind::MaeRank) };
        let (p, q) = ([0.2, -0.4, 1.0], [0.0, 0.3, 0.9]);
        assert_eq!(combined_loss(&spec, &p, &q).unwrap(), mae_loss(&p, &q).unwrap());
    }

    #[test]
    fn l2_examples() {
        let p = ParamSet::new(vec![Layer::new("l", vec![ParamTensor::from_vec(vec![3.0, 4.0])])])
            .unwrap();
        assert_eq!(l2_penalty(&p, 0.0), 0.0);
        assert_eq!(l2_penalty(&p, 1.0), 25.0);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let layers = (0..3)
            .map(|l| {
                let f = (0..5)
                    .map(|_| ParamTensor::from_vec((0..7).map(|_| rng.random_range(-1.0..1.0)).collect()))
                    .collect();
                Layer::new(format!("l{l}"), f)
            })
            .collect();
        let p = ParamSet::new(layers).unwrap();
        let expected = 0.05 * global_norm(&p).powi(2);
        assert!((l2_penalty(&p, 0.05) - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn prediction_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for kind in [LossKind::PlccRank, LossKind::MaeRank, LossKind::Mae, LossKind::SmoothL1] {
            let spec = LossSpec { smooth_l1_delta: 0.5, ..LossSpec::of_kind(kind) };
            let p: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, g) = combined_loss_grad(&spec, &p, &s).unwrap();
            let h = 1e-6;
            for i in 0..p.len() {
                let mut up = p.clone();
                up[i] += h;
                let mut dn = p.clone();
                dn[i] -= h;
                let fd = (combined_loss(&spec, &up, &s).unwrap()
                    - combined_loss(&spec, &dn, &s).unwrap())
                    / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-6, "{kind:?} coord {i}: {fd} vs {}", g[i]);
            }
        }
    }
}
