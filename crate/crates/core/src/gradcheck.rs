//! Central finite-difference checks for the MLP batch losses.
//!
//! The numerical gradient only ever calls [`Mlp::loss`], so it is independent
//! of the backprop path it is checked against. Coordinates whose `±h` probes
//! cross a non-differentiable point (ReLU kink, hinge of a RANK pair, sign
//! change of an absolute residual, smooth-L1 branch switch) are skipped.

use crate::error::Result;
use crate::losses::{LossKind, LossSpec};
use crate::model::{Batch, Mlp};
use crate::params::ParamSet;

/// Pre-activations closer than this to zero count as sitting on a ReLU kink.
pub const RELU_KINK_BAND: f64 = 1e-5;

/// Relative error denominator floor. Gradients smaller than this are
/// compared in absolute terms, where central differences at `h = 1e-6` carry
/// roughly `1e-10·|loss|` of round-off.
pub const REL_ERROR_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Sign pattern of every non-smooth sub-expression of the loss at `params`.
fn kink_signature(mlp: &Mlp, params: &ParamSet, batch: &Batch, spec: &LossSpec) -> Result<Vec<i8>> {
    let sign = |x: f64| -> i8 {
        if x > 0.0 {
            1
        } else if x < 0.0 {
            -1
        } else {
            0
        }
    };
    let mut sig = Vec::new();
    if mlp.activation() == crate::model::Activation::Relu {
        sig.extend(mlp.hidden_preactivations(params, batch)?.into_iter().map(sign));
    }
    let pred = mlp.forward(params, batch)?;
    let s = batch.scores();
    let uses_rank = match spec.kind {
        LossKind::PlccRank => spec.beta != 0.0,
        LossKind::MaeRank => spec.lambda_rank != 0.0,
        _ => false,
    };
    if uses_rank {
        for i in 0..pred.len() {
            for j in i + 1..pred.len() {
                if s[i] != s[j] {
                    sig.push(sign(pred[i] - pred[j]));
                }
            }
        }
    }
    match spec.kind {
        LossKind::MaeRank | LossKind::Mae => {
            sig.extend(pred.iter().zip(s).map(|(p, t)| sign(p - t)));
        }
        LossKind::SmoothL1 => {
            sig.extend(
                pred.iter()
                    .zip(s)
                    .map(|(p, t)| sign((p - t).abs() - spec.smooth_l1_delta)),
            );
        }
        LossKind::PlccRank => {}
    }
    Ok(sig)
}

fn near_relu_kink(mlp: &Mlp, params: &ParamSet, batch: &Batch) -> Result<bool> {
    if mlp.activation() != crate::model::Activation::Relu {
        return Ok(false);
    }
    Ok(mlp
        .hidden_preactivations(params, batch)?
        .iter()
        .any(|z| z.abs() < RELU_KINK_BAND))
}

/// Compares [`Mlp::loss_and_grad`] with central differences on every coordinate.
pub fn check_gradient(
    mlp: &Mlp,
    params: &ParamSet,
    batch: &Batch,
    spec: &LossSpec,
    h: f64,
) -> Result<GradCheckReport> {
    let (_, grad) = mlp.loss_and_grad(params, batch, spec)?;
    let analytic = grad.to_flat();
    let base = params.to_flat();
    let base_sig = kink_signature(mlp, params, batch, spec)?;
    let mut report = GradCheckReport { checked: 0, skipped: 0, max_rel_error: 0.0, worst_index: None };
    let mut probe = base.clone();
    for i in 0..base.len() {
        probe[i] = base[i] + h;
        let up = params.with_flat(&probe)?;
        probe[i] = base[i] - h;
        let dn = params.with_flat(&probe)?;
        probe[i] = base[i];

        let crosses = kink_signature(mlp, &up, batch, spec)? != base_sig
            || kink_signature(mlp, &dn, batch, spec)? != base_sig
            || near_relu_kink(mlp, &up, batch)?
            || near_relu_kink(mlp, &dn, batch)?;
        if crosses {
            report.skipped += 1;
            continue;
        }
        let numeric = (mlp.loss(&up, batch, spec)? - mlp.loss(&dn, batch, spec)?) / (2.0 * h);
        let err = relative_error(analytic[i], numeric);
        report.checked += 1;
        if report.worst_index.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = Some(i);
        }
    }
    Ok(report)
}
