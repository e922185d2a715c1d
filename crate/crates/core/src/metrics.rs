//! SRCC / PLCC evaluation and generalization-gap bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Batch, Mlp};
use crate::params::ParamSet;
use crate::sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub split: Split,
    pub srcc: f64,
    pub plcc: f64,
    pub epoch: usize,
}

/// Train minus test. Negative when the model does better on the test split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub srcc_gap: f64,
    pub plcc_gap: f64,
    pub epoch: usize,
}

fn check_inputs(pred: &[f64], scores: &[f64], what: &str) -> Result<()> {
    if pred.len() != scores.len() {
        return Err(Error::Shape(format!(
            "{what}: {} predictions vs {} scores",
            pred.len(),
            scores.len()
        )));
    }
    if pred.len() < 2 {
        return Err(Error::DegenerateBatch(format!("{what} needs at least 2 samples")));
    }
    Ok(())
}

/// Pearson linear correlation coefficient.
pub fn plcc(pred: &[f64], scores: &[f64]) -> Result<f64> {
    check_inputs(pred, scores, "plcc")?;
    pearson(pred, scores)
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::UndefinedCorrelation("non-finite input".into()));
    }
    let mx = sum::mean(x);
    let my = sum::mean(y);
    let cx: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let cy: Vec<f64> = y.iter().map(|v| v - my).collect();
    let sxx = sum::dot(&cx, &cx);
    let syy = sum::dot(&cy, &cy);
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input vector".into()));
    }
    let r = sum::dot(&cx, &cy) / (sxx * syy).sqrt();
    if r.is_nan() {
        return Err(Error::UndefinedCorrelation("correlation overflowed".into()));
    }
    Ok(r.clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing the average of the positions they span.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman rank-order correlation: Pearson correlation of average ranks.
pub fn srcc(pred: &[f64], scores: &[f64]) -> Result<f64> {
    check_inputs(pred, scores, "srcc")?;
    if pred.iter().any(|v| v.is_nan()) || scores.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("srcc of NaN input".into()));
    }
    pearson(&average_ranks(pred), &average_ranks(scores))
}

pub fn gap(train: &EvalRecord, test: &EvalRecord) -> Result<GapRecord> {
    if train.epoch != test.epoch {
        return Err(Error::EpochMismatch { train: train.epoch, test: test.epoch });
    }
    Ok(GapRecord {
        srcc_gap: train.srcc - test.srcc,
        plcc_gap: train.plcc - test.plcc,
        epoch: train.epoch,
    })
}

/// Predicts `data` at `params` and scores the predictions.
pub fn evaluate(mlp: &Mlp, params: &ParamSet, data: &Batch, split: Split, epoch: usize) -> Result<EvalRecord> {
    let pred = mlp.forward(params, data)?;
    Ok(EvalRecord {
        split,
        srcc: srcc(&pred, data.scores())?,
        plcc: plcc(&pred, data.scores())?,
        epoch,
    })
}
