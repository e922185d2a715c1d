//! Experiment configuration, read from TOML.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sharpkit::data::SyntheticSpec;
use sharpkit::landscape::Grid;
use sharpkit::metrics::Split;
use sharpkit::{Activation, PerturbConfig, TrainConfig};

use crate::error::{io_err, HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Synthetic(SyntheticSpec),
    Csv {
        path: PathBuf,
        #[serde(default = "default_score_column")]
        score_column: String,
        #[serde(default = "default_train_fraction")]
        train_fraction: f64,
        #[serde(default)]
        split_seed: u64,
    },
}

fn default_score_column() -> String {
    "score".into()
}

fn default_train_fraction() -> f64 {
    0.8
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Synthetic(SyntheticSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { layer_widths: vec![16, 32, 32, 1], activation: Activation::Relu }
    }
}

/// One row of the sweep. Unset overrides fall back to `[train]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb: Option<PerturbConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_noise: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeConfig {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub n_points: usize,
    pub n_direction_seeds: usize,
    /// Direction seeds are `first_direction_seed .. + n_direction_seeds`.
    pub first_direction_seed: u64,
    /// Extra epochs to probe besides the final one.
    pub epochs: Vec<usize>,
    pub split: Split,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        let g = Grid::default();
        Self {
            alpha_min: g.alpha_min,
            alpha_max: g.alpha_max,
            n_points: g.n_points,
            n_direction_seeds: 8,
            first_direction_seed: 0,
            epochs: Vec::new(),
            split: Split::Train,
        }
    }
}

impl LandscapeConfig {
    pub fn grid(&self) -> Grid {
        Grid { alpha_min: self.alpha_min, alpha_max: self.alpha_max, n_points: self.n_points }
    }

    pub fn direction_seeds(&self) -> Vec<u64> {
        (0..self.n_direction_seeds as u64).map(|k| self.first_direction_seed + k).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub landscape: LandscapeConfig,
    pub runs: Vec<RunSpec>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("sharpkit-out")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. A relative CSV dataset path is resolved against
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = Self::from_toml(&text)?;
        if let DatasetConfig::Csv { path: data, .. } = &mut cfg.dataset {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        if self.runs.is_empty() {
            return Err(HarnessError::Config("at least one run is required".into()));
        }
        let mut labels = BTreeSet::new();
        for run in &self.runs {
            if run.label.is_empty() || run.label.contains(['/', '\\', ',']) {
                return Err(HarnessError::Config(format!("invalid run label '{}'", run.label)));
            }
            if !labels.insert(run.label.as_str()) {
                return Err(HarnessError::Config(format!("duplicate run label '{}'", run.label)));
            }
            self.train_config(run, 0).validate()?;
        }
        if self.landscape.n_direction_seeds == 0 {
            return Err(HarnessError::Config("n_direction_seeds must be positive".into()));
        }
        self.landscape.grid().alphas()?;
        sharpkit::Mlp::new(self.model.layer_widths.clone(), self.model.activation)?;
        if let DatasetConfig::Synthetic(spec) = &self.dataset {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn run(&self, label: &str) -> Option<&RunSpec> {
        self.runs.iter().find(|r| r.label == label)
    }

    /// The full training configuration of one sweep cell.
    pub fn train_config(&self, run: &RunSpec, seed: u64) -> TrainConfig {
        let mut cfg = self.train.clone();
        if let Some(p) = run.perturb {
            cfg.perturb = p;
        }
        if let Some(l2) = run.l2 {
            cfg.loss.l2_lambda = l2;
        }
        if let Some(sigma) = run.input_noise {
            cfg.input_noise_sigma = sigma;
        }
        cfg.seed = seed;
        let mut epochs: Vec<usize> = cfg
            .checkpoint_epochs
            .iter()
            .chain(&self.landscape.epochs)
            .copied()
            .filter(|&e| e >= 1 && e <= cfg.epochs)
            .collect();
        epochs.push(cfg.epochs);
        epochs.retain(|&e| e >= 1);
        epochs.sort_unstable();
        epochs.dedup();
        cfg.checkpoint_epochs = epochs;
        cfg
    }
}
