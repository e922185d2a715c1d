//! The perturbed training step and the epoch loop around it.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{awp_ascent, sample_rwp, Optimizer, OptimizerConfig, PerturbConfig, PerturbMode};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::metrics::{self, EvalRecord, GapRecord, Split};
use crate::model::{BatchObjective, Mlp, MlpModel, Objective};
use crate::params::{layer_norms, ParamSet};

// Independent ChaCha streams derived from the run seed.
const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_INPUT_NOISE: u64 = 4;
const STREAM_PERTURB: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossSpec,
    pub perturb: PerturbConfig,
    pub optimizer: OptimizerConfig,
    /// Mini-batch size m.
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Standard deviation of Gaussian noise added to training inputs.
    pub input_noise_sigma: f64,
    /// Epochs (1-based) after which a parameter snapshot is kept.
    pub checkpoint_epochs: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossSpec::default(),
            perturb: PerturbConfig::default(),
            optimizer: OptimizerConfig::default(),
            batch_size: 16,
            epochs: 100,
            seed: 0,
            input_noise_sigma: 0.0,
            checkpoint_epochs: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.perturb.validate()?;
        self.optimizer.validate()?;
        if self.batch_size < self.loss.kind.min_batch() {
            return Err(Error::InvalidParameter(format!(
                "batch size {} is below the minimum {} for {}",
                self.batch_size,
                self.loss.kind.min_batch(),
                self.loss.kind.name()
            )));
        }
        if !(self.input_noise_sigma >= 0.0) {
            return Err(Error::InvalidParameter("input_noise_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub loss_w: f64,
    pub loss_w_eps: f64,
    pub eps_layer_norms: Vec<f64>,
}

/// One line of the step-metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub loss_w: f64,
    pub loss_w_eps: f64,
    pub eps_layer_norms: Vec<f64>,
}

/// Perturb, take the gradient at `w + ε`, update that point, then remove `ε`.
///
/// Every mode goes through the same add/update/subtract arithmetic, so a
/// zero perturbation reproduces the plain optimizer trajectory bit for bit.
pub fn train_step<O, R>(
    objective: &O,
    w: &ParamSet,
    perturb: &PerturbConfig,
    optimizer: &mut Optimizer,
    rng: &mut R,
) -> Result<(ParamSet, StepMetrics)>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    let (eps, loss_w) = match perturb.mode {
        PerturbMode::None => (w.zeros_like(), None),
        PerturbMode::Rwp => (sample_rwp(w, perturb.gamma, rng), Some(objective.loss(w)?)),
        PerturbMode::Awp => {
            let ascent = awp_ascent(objective, w, perturb)?;
            (ascent.eps, Some(ascent.losses[0]))
        }
    };
    let point = w.add(&eps)?;
    let (loss_w_eps, grad) = objective.loss_and_grad(&point)?;
    let stepped = optimizer.step(&point, &grad)?;
    let next = stepped.sub(&eps)?;
    Ok((
        next,
        StepMetrics {
            loss_w: loss_w.unwrap_or(loss_w_eps),
            loss_w_eps,
            eps_layer_norms: layer_norms(&eps),
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: EvalRecord,
    pub test: EvalRecord,
    pub gap: GapRecord,
    pub mean_loss_w: f64,
    pub mean_loss_w_eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedResult {
    pub params: ParamSet,
    pub history: Vec<EpochRecord>,
    pub checkpoints: Vec<(usize, ParamSet)>,
}

impl TrainedResult {
    pub fn checkpoint(&self, epoch: usize) -> Option<&ParamSet> {
        self.checkpoints.iter().find(|(e, _)| *e == epoch).map(|(_, p)| p)
    }
}

/// Initial parameters for a run, drawn from the run seed's init stream.
pub fn init_model(mlp: &Mlp, seed: u64) -> MlpModel {
    let params = mlp.default_init(&mut stream(seed, STREAM_INIT));
    MlpModel { mlp: mlp.clone(), params }
}

/// Full training run. Evaluation (train and test SRCC/PLCC) happens at the
/// unperturbed weights after every epoch. `on_step` sees every step record.
pub fn train(
    model: &MlpModel,
    data: &Dataset,
    cfg: &TrainConfig,
    on_step: &mut dyn FnMut(&StepRecord),
) -> Result<TrainedResult> {
    cfg.validate()?;
    let mlp = &model.mlp;
    mlp.check_params(&model.params)?;
    let n = data.train.len();
    if n < cfg.loss.kind.min_batch() {
        return Err(Error::DegenerateBatch(format!("{n} training rows")));
    }

    let mut shuffle_rng = stream(cfg.seed, STREAM_SHUFFLE);
    let mut noise_rng = stream(cfg.seed, STREAM_INPUT_NOISE);
    let mut perturb_rng = stream(cfg.seed, STREAM_PERTURB);
    let mut optimizer = Optimizer::new(cfg.optimizer);
    let mut w = model.params.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut checkpoints = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sum_w = 0.0;
        let mut sum_w_eps = 0.0;
        let mut steps = 0usize;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            if chunk.len() < cfg.loss.kind.min_batch() {
                continue;
            }
            let mut batch = data.train.select(chunk);
            if cfg.input_noise_sigma > 0.0 {
                for x in batch.inputs_mut() {
                    let z: f64 = StandardNormal.sample(&mut noise_rng);
                    *x += cfg.input_noise_sigma * z;
                }
            }
            let objective = BatchObjective::new(mlp, &batch, &cfg.loss);
            let (next, m) = train_step(&objective, &w, &cfg.perturb, &mut optimizer, &mut perturb_rng)
                .map_err(|e| match e {
                    Error::NonFinite(_) => Error::NonFiniteLoss { epoch, step, value: f64::NAN },
                    e => e,
                })?;
            for v in [m.loss_w, m.loss_w_eps] {
                if !v.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, step, value: v });
                }
            }
            if !next.all_finite() {
                return Err(Error::NonFiniteLoss { epoch, step, value: f64::NAN });
            }
            on_step(&StepRecord {
                epoch,
                step,
                loss_w: m.loss_w,
                loss_w_eps: m.loss_w_eps,
                eps_layer_norms: m.eps_layer_norms,
            });
            sum_w += m.loss_w;
            sum_w_eps += m.loss_w_eps;
            steps += 1;
            w = next;
        }
        let train_rec = metrics::evaluate(mlp, &w, &data.train, Split::Train, epoch)?;
        let test_rec = metrics::evaluate(mlp, &w, &data.test, Split::Test, epoch)?;
        history.push(EpochRecord {
            epoch,
            train: train_rec,
            test: test_rec,
            gap: metrics::gap(&train_rec, &test_rec)?,
            mean_loss_w: sum_w / steps.max(1) as f64,
            mean_loss_w_eps: sum_w_eps / steps.max(1) as f64,
        });
        if cfg.checkpoint_epochs.contains(&epoch) {
            checkpoints.push((epoch, w.clone()));
        }
    }
    Ok(TrainedResult { params: w, history, checkpoints })
}
