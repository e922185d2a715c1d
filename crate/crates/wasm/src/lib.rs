//! Browser bindings for the interactive demo page in `www/`.
//!
//! Each export takes and returns JSON so the page stays plain JavaScript.
//! The same functions are callable from Rust for testing.

use serde::{Deserialize, Serialize};
use sharpkit::data::{synthesize, Dataset, SyntheticSpec};
use sharpkit::landscape::{probe, summarize, Grid, LandscapeSlice, SharpnessSummary};
use sharpkit::losses::{mae_loss, plcc_loss, rank_loss, smooth_l1_loss};
use sharpkit::metrics::{plcc, srcc};
use sharpkit::perturb::{init_model, train, OptimizerConfig};
use sharpkit::{Activation, LossKind, LossSpec, Mlp, ParamSet, PerturbConfig, PerturbMode, TrainConfig};
use wasm_bindgen::prelude::*;

/// A small teacher-student task sized to train in the browser.
#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct DemoTask {
    pub n_train: usize,
    pub n_test: usize,
    pub input_dim: usize,
    pub hidden: usize,
    pub label_noise: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub loss: LossKind,
    pub seed: u64,
    pub runs: Vec<DemoRun>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DemoRun {
    pub label: String,
    pub mode: PerturbMode,
    #[serde(default)]
    pub gamma: f64,
}

impl Default for DemoTask {
    fn default() -> Self {
        Self {
            n_train: 100,
            n_test: 500,
            input_dim: 8,
            hidden: 16,
            label_noise: 0.3,
            epochs: 40,
            batch_size: 16,
            lr: 2e-3,
            loss: LossKind::SmoothL1,
            seed: 0,
            runs: vec![
                DemoRun { label: "vanilla".into(), mode: PerturbMode::None, gamma: 0.0 },
                DemoRun { label: "awp".into(), mode: PerturbMode::Awp, gamma: 1e-3 },
                DemoRun { label: "rwp".into(), mode: PerturbMode::Rwp, gamma: 1e-1 },
            ],
        }
    }
}

impl DemoTask {
    fn data(&self) -> sharpkit::Result<Dataset> {
        let spec = SyntheticSpec {
            n_train: self.n_train,
            n_test: self.n_test,
            input_dim: self.input_dim,
            teacher_widths: vec![self.input_dim, self.hidden, 1],
            label_noise_sigma: self.label_noise,
            ..SyntheticSpec::default()
        };
        synthesize(&spec, self.seed)
    }

    fn mlp(&self) -> sharpkit::Result<Mlp> {
        Mlp::new(vec![self.input_dim, self.hidden, self.hidden, 1], Activation::Tanh)
    }

    fn train_config(&self, run: &DemoRun) -> TrainConfig {
        let perturb = match run.mode {
            PerturbMode::None => PerturbConfig::none(),
            PerturbMode::Awp => PerturbConfig::awp(run.gamma),
            PerturbMode::Rwp => PerturbConfig::rwp(run.gamma),
        };
        TrainConfig {
            loss: LossSpec::of_kind(self.loss),
            perturb,
            optimizer: OptimizerConfig { lr: self.lr, ..OptimizerConfig::default() },
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }

    fn train_run(&self, run: &DemoRun, data: &Dataset) -> sharpkit::Result<(RunCurves, ParamSet)> {
        let mlp = self.mlp()?;
        let model = init_model(&mlp, self.seed);
        let result = train(&model, data, &self.train_config(run), &mut |_| {})?;
        let mut curves = RunCurves { label: run.label.clone(), ..RunCurves::default() };
        for rec in &result.history {
            curves.epochs.push(rec.epoch);
            curves.train_srcc.push(rec.train.srcc);
            curves.test_srcc.push(rec.test.srcc);
            curves.srcc_gap.push(rec.gap.srcc_gap);
            curves.loss.push(rec.mean_loss_w);
        }
        Ok((curves, result.params))
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunCurves {
    pub label: String,
    pub epochs: Vec<usize>,
    pub train_srcc: Vec<f64>,
    pub test_srcc: Vec<f64>,
    pub srcc_gap: Vec<f64>,
    pub loss: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunLandscape {
    pub label: String,
    pub slices: Vec<LandscapeSlice>,
    pub summary: SharpnessSummary,
}

/// Trains every run of the task and returns per-epoch metric curves.
pub fn curves(task: &DemoTask) -> sharpkit::Result<Vec<RunCurves>> {
    let data = task.data()?;
    task.runs.iter().map(|r| task.train_run(r, &data).map(|(c, _)| c)).collect()
}

/// Trains every run, then slices the final weights' training loss along
/// `n_directions` filter-normalized directions.
pub fn landscapes(task: &DemoTask, n_directions: usize, n_points: usize) -> sharpkit::Result<Vec<RunLandscape>> {
    let data = task.data()?;
    let grid = Grid { n_points, ..Grid::default() };
    let seeds: Vec<u64> = (0..n_directions as u64).collect();
    let mlp = task.mlp()?;
    let loss = LossSpec::of_kind(task.loss);
    task.runs
        .iter()
        .map(|r| {
            let (_, w) = task.train_run(r, &data)?;
            let slices = probe(&mlp, &w, &data.train, &loss, &grid, &seeds)?;
            let summary = summarize(&slices)?;
            Ok(RunLandscape { label: r.label.clone(), slices, summary })
        })
        .collect()
}

/// Correlations and losses of a prediction vector; `None` where undefined.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LossReport {
    pub srcc: Option<f64>,
    pub plcc: Option<f64>,
    pub plcc_loss: Option<f64>,
    pub rank_loss: Option<f64>,
    pub mae: Option<f64>,
    pub smooth_l1: Option<f64>,
    pub errors: Vec<String>,
}

pub fn loss_report(pred: &[f64], scores: &[f64]) -> LossReport {
    let mut rep = LossReport::default();
    let mut take = |name: &str, r: sharpkit::Result<f64>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            rep.errors.push(format!("{name}: {e}"));
            None
        }
    };
    let srcc = take("srcc", srcc(pred, scores));
    let plcc = take("plcc", plcc(pred, scores));
    let plcc_loss = take("plcc_loss", plcc_loss(pred, scores));
    let rank_loss = take("rank_loss", rank_loss(pred, scores));
    let mae = take("mae", mae_loss(pred, scores));
    let smooth_l1 = take("smooth_l1", smooth_l1_loss(pred, scores, 1.0));
    LossReport { srcc, plcc, plcc_loss, rank_loss, mae, smooth_l1, errors: rep.errors }
}

fn parse_task(json: &str) -> Result<DemoTask, JsError> {
    if json.trim().is_empty() {
        return Ok(DemoTask::default());
    }
    serde_json::from_str(json).map_err(|e| JsError::new(&format!("bad task: {e}")))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = trainCurves)]
pub fn train_curves_js(task_json: &str) -> Result<String, JsError> {
    let task = parse_task(task_json)?;
    to_json(&curves(&task).map_err(|e| JsError::new(&e.to_string()))?)
}

#[wasm_bindgen(js_name = landscapeSlices)]
pub fn landscape_slices_js(task_json: &str, n_directions: usize, n_points: usize) -> Result<String, JsError> {
    let task = parse_task(task_json)?;
    to_json(&landscapes(&task, n_directions, n_points).map_err(|e| JsError::new(&e.to_string()))?)
}

#[wasm_bindgen(js_name = lossReport)]
pub fn loss_report_js(pred: Vec<f64>, scores: Vec<f64>) -> Result<String, JsError> {
    to_json(&loss_report(&pred, &scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> DemoTask {
        DemoTask { n_train: 40, n_test: 60, epochs: 3, ..DemoTask::default() }
    }

    #[test]
    fn curves_cover_every_run_and_epoch() {
        let c = curves(&quick()).unwrap();
        assert_eq!(c.len(), 3);
        for run in &c {
            assert_eq!(run.epochs, vec![1, 2, 3]);
            for (g, (a, b)) in run.srcc_gap.iter().zip(run.train_srcc.iter().zip(&run.test_srcc)) {
                assert_eq!(*g, a - b);
            }
        }
    }

    #[test]
    fn landscapes_have_requested_shape() {
        let l = landscapes(&quick(), 2, 11).unwrap();
        assert_eq!(l.len(), 3);
        assert!(l.iter().all(|r| r.slices.len() == 2 && r.slices[0].losses.len() == 11));
        assert_eq!(l[0].summary.n_directions, 2);
    }

    #[test]
    fn loss_report_flags_constant_predictions() {
        let r = loss_report(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]);
        assert!(r.errors.is_empty());
        assert!((r.srcc.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(r.rank_loss, Some(2.0));
        let r = loss_report(&[1.0, 1.0, 1.0], &[1.0, 3.0, 2.0]);
        assert!(r.srcc.is_none() && r.plcc.is_none());
        assert_eq!(r.mae, Some(1.0));
        assert!(!r.errors.is_empty());
    }

    #[test]
    fn task_json_uses_defaults() {
        let t: DemoTask = serde_json::from_str(r#"{"epochs": 5, "runs": [{"label": "a", "mode": "awp", "gamma": 0.01}]}"#).unwrap();
        assert_eq!(t.epochs, 5);
        assert_eq!(t.n_train, 100);
        assert_eq!(t.runs[0].mode, PerturbMode::Awp);
    }
}
