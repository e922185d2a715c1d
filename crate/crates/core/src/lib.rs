//! Sharpness-aware training and landscape probing for small quality regressors.
//!
//! The crate is organised bottom-up:
//!
//! - [`params`], [`model`]: a congruence-checked parameter container and a
//!   scalar-output MLP with explicit backprop ([`gradcheck`] verifies it).
//! - [`losses`]: PLCC, RANK, MAE and smooth-L1 batch losses plus L2.
//! - [`metrics`]: SRCC / PLCC and train–test gap records.
//! - [`perturb`]: random and adversarial weight perturbation under a
//!   layer-wise relative norm bound, the perturbed training step and the
//!   epoch loop.
//! - [`landscape`]: filter-normalized 1D loss slices and sharpness statistics.
//! - [`data`]: teacher–student synthetic task and seeded train/test splits.
//! - [`checkpoint`]: exact plain-text parameter snapshots.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod landscape;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod params;
pub mod perturb;
pub mod sum;

pub use error::{Error, Result};
pub use losses::{LossKind, LossSpec};
pub use model::{Activation, Batch, BatchObjective, Mlp, MlpModel, Objective};
pub use params::{Layer, ParamSet, ParamTensor};
pub use perturb::{PerturbConfig, PerturbMode, TrainConfig};
