//! Filter-normalized 1D loss-landscape slices.
//!
//! A slice evaluates `g(α) = ℓ(w + α·d)` on a grid of `α` values, where `d`
//! is a Gaussian direction whose every filter has been rescaled to the
//! Frobenius norm of the matching weight filter. Sharpness is summarized as
//! the maximum and mean rise of `g` above `g(0)`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BatchObjective, Batch, Mlp, Objective};
use crate::losses::LossSpec;
use crate::params::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub n_points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self { alpha_min: -1.0, alpha_max: 1.0, n_points: 41 }
    }
}

impl Grid {
    /// Evenly spaced points; the point nearest to zero is snapped to exactly 0.
    pub fn alphas(&self) -> Result<Vec<f64>> {
        if self.n_points < 3 {
            return Err(Error::InvalidParameter(format!("need >= 3 grid points, got {}", self.n_points)));
        }
        if !(self.alpha_min < self.alpha_max) || !(self.alpha_min <= 0.0 && self.alpha_max >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid [{}, {}] must be increasing and contain 0",
                self.alpha_min, self.alpha_max
            )));
        }
        let span = self.alpha_max - self.alpha_min;
        let last = (self.n_points - 1) as f64;
        let mut alphas: Vec<f64> =
            (0..self.n_points).map(|k| self.alpha_min + span * (k as f64 / last)).collect();
        let (zi, &closest) = alphas
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("non-empty grid");
        if closest.abs() > 1e-9 * span {
            return Err(Error::InvalidParameter(format!(
                "grid [{}, {}] with {} points has no point at 0",
                self.alpha_min, self.alpha_max, self.n_points
            )));
        }
        alphas[zi] = 0.0;
        Ok(alphas)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSlice {
    pub alphas: Vec<f64>,
    /// `g(α)`; non-finite evaluations are stored as `+∞`.
    pub losses: Vec<f64>,
    pub direction_seed: u64,
    pub sharpness_max: f64,
    pub sharpness_mean: f64,
    pub has_nonfinite: bool,
}

impl LandscapeSlice {
    pub fn zero_index(&self) -> usize {
        self.alphas.iter().position(|&a| a == 0.0).expect("grid contains 0")
    }

    pub fn loss_at_zero(&self) -> f64 {
        self.losses[self.zero_index()]
    }
}

/// Rescales every filter of `raw` to the Frobenius norm of the matching
/// filter of `w`. Filters of `w` with zero norm get a zero direction.
pub fn filter_normalize(raw: &ParamSet, w: &ParamSet) -> Result<ParamSet> {
    raw.check_congruent(w)?;
    let mut d = raw.clone();
    for (dl, wl) in d.layers_mut().iter_mut().zip(w.layers()) {
        for (df, wf) in dl.filters.iter_mut().zip(&wl.filters) {
            let target = wf.norm();
            let n = df.norm();
            let vals = df.values_mut();
            if target == 0.0 || n == 0.0 {
                vals.fill(0.0);
            } else {
                for v in vals {
                    *v = *v / n * target;
                }
            }
        }
    }
    Ok(d)
}

pub fn gaussian_like<R: Rng + ?Sized>(w: &ParamSet, rng: &mut R) -> ParamSet {
    w.map(|_| StandardNormal.sample(rng))
}

/// Filter-normalized Gaussian direction.
pub fn sample_direction<R: Rng + ?Sized>(w: &ParamSet, rng: &mut R) -> ParamSet {
    filter_normalize(&gaussian_like(w, rng), w).expect("congruent by construction")
}

/// Direction for a given seed, independent of any other RNG use.
pub fn direction_for_seed(w: &ParamSet, seed: u64) -> ParamSet {
    sample_direction(w, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `g(α) = objective(w + α·d)` over the grid. `α = 0` evaluates `w` itself.
pub fn slice_objective<O: Objective + ?Sized>(
    objective: &O,
    w: &ParamSet,
    d: &ParamSet,
    grid: &Grid,
    direction_seed: u64,
) -> Result<LandscapeSlice> {
    w.check_congruent(d)?;
    let alphas = grid.alphas()?;
    let mut losses = Vec::with_capacity(alphas.len());
    let mut has_nonfinite = false;
    for &a in &alphas {
        let value = if a == 0.0 { objective.loss(w) } else { objective.loss(&w.axpy(a, d)?) };
        let value = match value {
            Ok(v) if v.is_finite() => v,
            Ok(_) => {
                has_nonfinite = true;
                f64::INFINITY
            }
            Err(e @ (Error::Congruence(_) | Error::Shape(_))) => return Err(e),
            Err(_) => {
                has_nonfinite = true;
                f64::INFINITY
            }
        };
        losses.push(value);
    }
    let zi = alphas.iter().position(|&a| a == 0.0).expect("grid contains 0");
    let g0 = losses[zi];
    let max = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = crate::sum::mean(&losses);
    Ok(LandscapeSlice {
        alphas,
        sharpness_max: max - g0,
        sharpness_mean: mean - g0,
        losses,
        direction_seed,
        has_nonfinite,
    })
}

/// Slice of the MLP batch loss on `data`.
pub fn slice(
    mlp: &Mlp,
    w: &ParamSet,
    d: &ParamSet,
    data: &Batch,
    loss: &LossSpec,
    grid: &Grid,
    direction_seed: u64,
) -> Result<LandscapeSlice> {
    slice_objective(&BatchObjective::new(mlp, data, loss), w, d, grid, direction_seed)
}

/// One slice per direction seed.
pub fn probe(
    mlp: &Mlp,
    w: &ParamSet,
    data: &Batch,
    loss: &LossSpec,
    grid: &Grid,
    seeds: &[u64],
) -> Result<Vec<LandscapeSlice>> {
    seeds
        .iter()
        .map(|&s| slice(mlp, w, &direction_for_seed(w, s), data, loss, grid, s))
        .collect()
}

/// Multi-direction aggregate of slice sharpness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpnessSummary {
    pub n_directions: usize,
    pub mean_sharpness_max: f64,
    pub mean_sharpness_mean: f64,
    /// Coefficient of variation (sample std / mean) across directions.
    pub cv_sharpness_max: f64,
    pub cv_sharpness_mean: f64,
}

fn mean_cv(v: &[f64]) -> (f64, f64) {
    let m = crate::sum::mean(v);
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = crate::sum::sum(v.iter().map(|x| (x - m) * (x - m))) / (v.len() - 1) as f64;
    (m, var.sqrt() / m.abs())
}

pub fn summarize(slices: &[LandscapeSlice]) -> Result<SharpnessSummary> {
    if slices.is_empty() {
        return Err(Error::InvalidParameter("no slices to summarize".into()));
    }
    let maxes: Vec<f64> = slices.iter().map(|s| s.sharpness_max).collect();
    let means: Vec<f64> = slices.iter().map(|s| s.sharpness_mean).collect();
    let (mean_max, cv_max) = mean_cv(&maxes);
    let (mean_mean, cv_mean) = mean_cv(&means);
    Ok(SharpnessSummary {
        n_directions: slices.len(),
        mean_sharpness_max: mean_max,
        mean_sharpness_mean: mean_mean,
        cv_sharpness_max: cv_max,
        cv_sharpness_mean: cv_mean,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRun {
    pub label: String,
    pub value: f64,
}

/// Runs ordered from smoothest to sharpest under both statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub by_max: Vec<RankedRun>,
    pub by_mean: Vec<RankedRun>,
}

/// Ranks labelled runs by their mean sharpness over all slices of each run.
/// Every slice must share one α grid. Ties go to the lexicographically
/// smaller label.
pub fn compare_slices(runs: &[(String, Vec<LandscapeSlice>)]) -> Result<SharpnessReport> {
    let reference = runs
        .iter()
        .flat_map(|(_, s)| s.first())
        .next()
        .map(|s| s.alphas.clone());
    let mut by_max = Vec::new();
    let mut by_mean = Vec::new();
    for (label, slices) in runs {
        if let Some(r) = &reference {
            if slices.iter().any(|s| &s.alphas != r) {
                return Err(Error::GridMismatch(format!("run '{label}' uses a different α grid")));
            }
        }
        let summary = summarize(slices)?;
        by_max.push(RankedRun { label: label.clone(), value: summary.mean_sharpness_max });
        by_mean.push(RankedRun { label: label.clone(), value: summary.mean_sharpness_mean });
    }
    let order = |a: &RankedRun, b: &RankedRun| {
        a.value.total_cmp(&b.value).then_with(|| a.label.cmp(&b.label))
    };
    by_max.sort_by(order);
    by_mean.sort_by(order);
    Ok(SharpnessReport { by_max, by_mean })
}

impl SharpnessReport {
    pub fn position(&self, label: &str) -> Option<(usize, usize)> {
        let find = |v: &[RankedRun]| v.iter().position(|r| r.label == label);
        Some((find(&self.by_max)?, find(&self.by_mean)?))
    }
}
