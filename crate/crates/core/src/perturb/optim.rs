use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    SgdMomentum,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "sgd_momentum" => Ok(OptimizerKind::SgdMomentum),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::InvalidParameter(format!("unknown optimizer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    /// Outer learning rate η₁.
    pub lr: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Decoupled weight decay, applied to the point the gradient was taken at.
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr: 1e-3,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidParameter(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidParameter("weight_decay must be >= 0".into()));
        }
        let unit = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be in [0, 1), got {v}")))
            }
        };
        unit("momentum", self.momentum)?;
        unit("beta1", self.beta1)?;
        unit("beta2", self.beta2)?;
        if !(self.adam_eps > 0.0) {
            return Err(Error::InvalidParameter("adam_eps must be > 0".into()));
        }
        Ok(())
    }
}

/// Stateful first-order optimizer over [`ParamSet`]s.
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    first: Option<ParamSet>,
    second: Option<ParamSet>,
    t: u64,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig) -> Self {
        Self { cfg, first: None, second: None, t: 0 }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One update of `point` along `grad`; returns the new point.
    pub fn step(&mut self, point: &ParamSet, grad: &ParamSet) -> Result<ParamSet> {
        point.check_congruent(grad)?;
        let lr = self.cfg.lr;
        let wd = self.cfg.weight_decay;
        self.t += 1;
        match self.cfg.kind {
            OptimizerKind::Sgd => point.zip_map(grad, |p, g| p - lr * (g + wd * p)),
            OptimizerKind::SgdMomentum => {
                let mu = self.cfg.momentum;
                let v = match &self.first {
                    None => grad.clone(),
                    Some(v) => v.zip_map(grad, |v, g| mu * v + g)?,
                };
                let out = point.zip_map(&v, |p, v| p - lr * (v + wd * p))?;
                self.first = Some(v);
                Ok(out)
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (self.cfg.beta1, self.cfg.beta2, self.cfg.adam_eps);
                let m = match &self.first {
                    None => grad.map(|g| (1.0 - b1) * g),
                    Some(m) => m.zip_map(grad, |m, g| b1 * m + (1.0 - b1) * g)?,
                };
                let v = match &self.second {
                    None => grad.map(|g| (1.0 - b2) * g * g),
                    Some(v) => v.zip_map(grad, |v, g| b2 * v + (1.0 - b2) * g * g)?,
                };
                let c1 = 1.0 - b1.powi(self.t as i32);
                let c2 = 1.0 - b2.powi(self.t as i32);
                let dir = m.zip_map(&v, |m, v| (m / c1) / ((v / c2).sqrt() + eps))?;
                let out = point.zip_map(&dir, |p, d| p - lr * (d + wd * p))?;
                self.first = Some(m);
                self.second = Some(v);
                Ok(out)
            }
        }
    }
}
