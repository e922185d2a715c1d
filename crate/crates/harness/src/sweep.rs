//! Seeded multi-run sweeps and their CSV reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use sharpkit::checkpoint;
use sharpkit::landscape::{probe, summarize, LandscapeSlice, SharpnessSummary};
use sharpkit::metrics::{self, EvalRecord, GapRecord, Split};
use sharpkit::perturb::{init_model, train};
use sharpkit::{Mlp, MlpModel, ParamSet};

use crate::config::{ExperimentConfig, RunSpec};
use crate::dataset;
use crate::error::{io_err, HarnessError, Result};

pub const THREADS_ENV: &str = "SHARPKIT_THREADS";
pub const FAILED: &str = "FAILED";

/// Train and test metrics of one epoch. Epoch 0 is the initial model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train: EvalRecord,
    pub test: EvalRecord,
    pub gap: GapRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbedEpoch {
    pub epoch: usize,
    pub slices: Vec<LandscapeSlice>,
    pub summary: SharpnessSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub metrics: Vec<EpochMetrics>,
    pub landscapes: Vec<ProbedEpoch>,
    pub final_params: ParamSet,
}

impl CellResult {
    pub fn last(&self) -> &EpochMetrics {
        self.metrics.last().expect("epoch 0 is always recorded")
    }

    pub fn at_epoch(&self, epoch: usize) -> Option<&EpochMetrics> {
        self.metrics.iter().find(|m| m.epoch == epoch)
    }

    pub fn landscape(&self, epoch: usize) -> Option<&ProbedEpoch> {
        self.landscapes.iter().find(|p| p.epoch == epoch)
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub label: String,
    pub seed: u64,
    pub outcome: std::result::Result<CellResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub train_srcc: f64,
    pub test_srcc: f64,
    pub srcc_gap: f64,
    pub train_plcc: f64,
    pub test_plcc: f64,
    pub plcc_gap: f64,
}

impl MetricRow {
    /// Medians of the train and test columns; gaps are the difference of those medians.
    fn median_of(rows: &[&EpochMetrics]) -> Self {
        let col = |f: &dyn Fn(&EpochMetrics) -> f64| median(rows.iter().map(|m| f(m)).collect());
        let train_srcc = col(&|m| m.train.srcc);
        let test_srcc = col(&|m| m.test.srcc);
        let train_plcc = col(&|m| m.train.plcc);
        let test_plcc = col(&|m| m.test.plcc);
        Self {
            train_srcc,
            test_srcc,
            srcc_gap: train_srcc - test_srcc,
            train_plcc,
            test_plcc,
            plcc_gap: train_plcc - test_plcc,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub seeds: usize,
    pub failed: usize,
    /// `None` when every seed failed.
    pub metrics: Option<MetricRow>,
    pub sharpness_max: Option<f64>,
    pub sharpness_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub label: String,
    pub epoch: usize,
    pub metrics: MetricRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessRow {
    pub label: String,
    pub epoch: usize,
    pub sharpness_max: f64,
    pub sharpness_mean: f64,
    pub cv_sharpness_max: f64,
    pub cv_sharpness_mean: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    /// Cells sorted by label, then seed.
    pub cells: Vec<Cell>,
    pub summary: Vec<SummaryRow>,
    pub curves: Vec<CurveRow>,
    pub sharpness: Vec<SharpnessRow>,
}

impl SweepReport {
    pub fn summary_row(&self, label: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.label == label)
    }

    pub fn curve(&self, label: &str, epoch: usize) -> Option<&CurveRow> {
        self.curves.iter().find(|r| r.label == label && r.epoch == epoch)
    }

    pub fn sharpness_at(&self, label: &str, epoch: usize) -> Option<&SharpnessRow> {
        self.sharpness.iter().find(|r| r.label == label && r.epoch == epoch)
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty(), "median of nothing");
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn cell_dir(root: &Path, label: &str, seed: u64) -> PathBuf {
    root.join("runs").join(label).join(format!("seed{seed}"))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn eval_pair(mlp: &Mlp, params: &ParamSet, data: &sharpkit::data::Dataset, epoch: usize) -> Result<EpochMetrics> {
    let train = metrics::evaluate(mlp, params, &data.train, Split::Train, epoch)?;
    let test = metrics::evaluate(mlp, params, &data.test, Split::Test, epoch)?;
    Ok(EpochMetrics { epoch, train, test, gap: metrics::gap(&train, &test)? })
}

/// Trains one (run, seed) cell, probes its landscapes and, when `out` is
/// given, writes the cell's files there.
pub fn run_cell(cfg: &ExperimentConfig, run: &RunSpec, seed: u64, out: Option<&Path>) -> Result<CellResult> {
    let data = dataset::resolve(&cfg.dataset, seed)?;
    let mlp = Mlp::new(cfg.model.layer_widths.clone(), cfg.model.activation)?;
    if data.train.dim() != mlp.input_dim() {
        return Err(HarnessError::Config(format!(
            "dataset has {} features but the model expects {}",
            data.train.dim(),
            mlp.input_dim()
        )));
    }
    let tc = cfg.train_config(run, seed);
    let model = init_model(&mlp, seed);

    let mut steps = String::new();
    let trained = train(&model, &data, &tc, &mut |s| {
        steps.push_str(&serde_json::to_string(s).expect("step records serialize"));
        steps.push('\n');
    });
    if let Some(dir) = out {
        write(&dir.join("steps.jsonl"), &steps)?;
    }
    let trained = trained?;

    let mut all = vec![eval_pair(&mlp, &model.params, &data, 0)?];
    all.extend(trained.history.iter().map(|h| EpochMetrics {
        epoch: h.epoch,
        train: h.train,
        test: h.test,
        gap: h.gap,
    }));

    let final_epoch = tc.epochs;
    let params_at = |epoch: usize| -> Option<&ParamSet> {
        if epoch == 0 {
            Some(&model.params)
        } else {
            trained.checkpoint(epoch)
        }
    };
    let mut probe_epochs: Vec<usize> =
        cfg.landscape.epochs.iter().copied().filter(|&e| e <= final_epoch).collect();
    probe_epochs.push(final_epoch);
    probe_epochs.sort_unstable();
    probe_epochs.dedup();

    let probe_data = match cfg.landscape.split {
        Split::Train => &data.train,
        Split::Test => &data.test,
    };
    let grid = cfg.landscape.grid();
    let seeds = cfg.landscape.direction_seeds();
    let mut landscapes = Vec::new();
    for epoch in probe_epochs {
        let w = params_at(epoch).expect("probe epochs are always checkpointed");
        let slices = probe(&mlp, w, probe_data, &tc.loss, &grid, &seeds)?;
        let summary = summarize(&slices)?;
        landscapes.push(ProbedEpoch { epoch, slices, summary });
    }

    if let Some(dir) = out {
        write(&dir.join("metrics.csv"), &metrics_csv(&all))?;
        write(&dir.join("gap.csv"), &gap_csv(&all))?;
        for (epoch, params) in &trained.checkpoints {
            let m = MlpModel { mlp: mlp.clone(), params: params.clone() };
            write(&dir.join(format!("epoch{epoch}.ckpt")), &checkpoint::to_string(&m))?;
        }
        let m = MlpModel { mlp: mlp.clone(), params: trained.params.clone() };
        write(&dir.join("final.ckpt"), &checkpoint::to_string(&m))?;
        for p in &landscapes {
            for s in &p.slices {
                let name = format!("epoch{}_dir{}.csv", p.epoch, s.direction_seed);
                write(&dir.join("landscape").join(name), &slice_csv(&run.label, s))?;
            }
        }
    }
    Ok(CellResult { metrics: all, landscapes, final_params: trained.params })
}

pub fn metrics_csv(rows: &[EpochMetrics]) -> String {
    let mut s = String::from("epoch,split,srcc,plcc\n");
    for m in rows {
        for r in [&m.train, &m.test] {
            writeln!(s, "{},{},{},{}", m.epoch, r.split.name(), r.srcc, r.plcc).unwrap();
        }
    }
    s
}

pub fn gap_csv(rows: &[EpochMetrics]) -> String {
    let mut s = String::from("epoch,srcc_gap,plcc_gap\n");
    for m in rows {
        writeln!(s, "{},{},{}", m.epoch, m.gap.srcc_gap, m.gap.plcc_gap).unwrap();
    }
    s
}

pub fn slice_csv(label: &str, slice: &LandscapeSlice) -> String {
    let mut s = String::from("alpha,loss,run_label,direction_seed\n");
    for (a, l) in slice.alphas.iter().zip(&slice.losses) {
        writeln!(s, "{a},{l},{label},{}", slice.direction_seed).unwrap();
    }
    s
}

fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| HarnessError::Config(format!("{THREADS_ENV} must be a non-negative integer, got '{v}'"))),
    }
}

/// Hash of the experiment itself; the output location does not contribute.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut canonical = cfg.clone();
    canonical.output_dir = PathBuf::new();
    hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
}

/// Runs every (run, seed) cell and writes all reports under `cfg.output_dir`.
/// A failing cell is reported as `FAILED` and does not stop the others.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let root = cfg.output_dir.clone();
    fs::create_dir_all(&root).map_err(io_err(&root))?;

    let mut jobs: Vec<(&RunSpec, u64)> =
        cfg.runs.iter().flat_map(|r| cfg.seeds.iter().map(move |&s| (r, s))).collect();
    jobs.sort_by(|a, b| a.0.label.cmp(&b.0.label).then(a.1.cmp(&b.1)));
    jobs.dedup_by(|a, b| a.0.label == b.0.label && a.1 == b.1);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let cells: Vec<Cell> = pool.install(|| {
        jobs.par_iter()
            .map(|(run, seed)| {
                let dir = cell_dir(&root, &run.label, *seed);
                let outcome = run_cell(cfg, run, *seed, Some(&dir)).map_err(|e| e.to_string());
                if let Err(msg) = &outcome {
                    let _ = write(&dir.join("error.txt"), &format!("{msg}\n"));
                }
                Cell { label: run.label.clone(), seed: *seed, outcome }
            })
            .collect()
    });

    let report = aggregate(cells);
    write(&root.join("runs.csv"), &runs_csv(&report))?;
    write(&root.join("summary.csv"), &summary_csv(&report))?;
    write(&root.join("curves.csv"), &curves_csv(&report))?;
    write(&root.join("sharpness.csv"), &sharpness_detail_csv(&report))?;
    write(&root.join("sharpness_summary.csv"), &sharpness_summary_csv(&report))?;
    write(&root.join("manifest.txt"), &manifest(cfg, &report))?;
    Ok(report)
}

fn labels(cells: &[Cell]) -> Vec<String> {
    let mut l: Vec<String> = cells.iter().map(|c| c.label.clone()).collect();
    l.dedup();
    l
}

pub fn aggregate(cells: Vec<Cell>) -> SweepReport {
    let mut summary = Vec::new();
    let mut curves = Vec::new();
    let mut sharpness = Vec::new();
    for label in labels(&cells) {
        let mine: Vec<&Cell> = cells.iter().filter(|c| c.label == label).collect();
        let ok: Vec<&CellResult> = mine.iter().filter_map(|c| c.outcome.as_ref().ok()).collect();
        let last: Vec<&EpochMetrics> = ok.iter().map(|r| r.last()).collect();
        let final_sharp = |f: fn(&SharpnessSummary) -> f64| -> Option<f64> {
            let v: Vec<f64> = ok
                .iter()
                .filter_map(|r| r.landscape(r.last().epoch).map(|p| f(&p.summary)))
                .collect();
            (!v.is_empty()).then(|| median(v))
        };
        summary.push(SummaryRow {
            label: label.clone(),
            seeds: mine.len(),
            failed: mine.len() - ok.len(),
            metrics: (!last.is_empty()).then(|| MetricRow::median_of(&last)),
            sharpness_max: final_sharp(|s| s.mean_sharpness_max),
            sharpness_mean: final_sharp(|s| s.mean_sharpness_mean),
        });

        if let Some(first) = ok.first() {
            for m in &first.metrics {
                let at: Vec<&EpochMetrics> = ok.iter().filter_map(|r| r.at_epoch(m.epoch)).collect();
                if at.len() == ok.len() {
                    curves.push(CurveRow { label: label.clone(), epoch: m.epoch, metrics: MetricRow::median_of(&at) });
                }
            }
            for p in &first.landscapes {
                let at: Vec<&SharpnessSummary> =
                    ok.iter().filter_map(|r| r.landscape(p.epoch).map(|q| &q.summary)).collect();
                if at.len() == ok.len() {
                    let col = |f: fn(&SharpnessSummary) -> f64| median(at.iter().map(|s| f(s)).collect());
                    sharpness.push(SharpnessRow {
                        label: label.clone(),
                        epoch: p.epoch,
                        sharpness_max: col(|s| s.mean_sharpness_max),
                        sharpness_mean: col(|s| s.mean_sharpness_mean),
                        cv_sharpness_max: col(|s| s.cv_sharpness_max),
                        cv_sharpness_mean: col(|s| s.cv_sharpness_mean),
                    });
                }
            }
        }
    }
    SweepReport { cells, summary, curves, sharpness }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| FAILED.to_string(), |x| x.to_string())
}

fn metric_cells(m: Option<&MetricRow>) -> String {
    match m {
        Some(m) => format!(
            "{},{},{},{},{},{}",
            m.train_srcc, m.test_srcc, m.srcc_gap, m.train_plcc, m.test_plcc, m.plcc_gap
        ),
        None => [FAILED; 6].join(","),
    }
}

const METRIC_HEADER: &str = "train_srcc,test_srcc,srcc_gap,train_plcc,test_plcc,plcc_gap";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn runs_csv(report: &SweepReport) -> String {
    let mut s = format!("label,seed,status,epoch,{METRIC_HEADER},sharpness_max,sharpness_mean,error\n");
    for c in &report.cells {
        match &c.outcome {
            Ok(r) => {
                let m = r.last();
                let row = MetricRow::median_of(&[m]);
                let p = r.landscape(m.epoch);
                writeln!(
                    s,
                    "{},{},ok,{},{},{},{},",
                    c.label,
                    c.seed,
                    m.epoch,
                    metric_cells(Some(&row)),
                    opt(p.map(|p| p.summary.mean_sharpness_max)),
                    opt(p.map(|p| p.summary.mean_sharpness_mean)),
                )
                .unwrap();
            }
            Err(e) => {
                writeln!(
                    s,
                    "{},{},{FAILED},{FAILED},{},{FAILED},{FAILED},{}",
                    c.label,
                    c.seed,
                    metric_cells(None),
                    csv_field(e)
                )
                .unwrap();
            }
        }
    }
    s
}

pub fn summary_csv(report: &SweepReport) -> String {
    let mut s = format!("label,seeds,failed,{METRIC_HEADER},sharpness_max,sharpness_mean\n");
    for r in &report.summary {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            r.label,
            r.seeds,
            r.failed,
            metric_cells(r.metrics.as_ref()),
            opt(r.sharpness_max),
            opt(r.sharpness_mean)
        )
        .unwrap();
    }
    s
}

pub fn curves_csv(report: &SweepReport) -> String {
    let mut s = format!("label,epoch,{METRIC_HEADER}\n");
    for r in &report.curves {
        writeln!(s, "{},{},{}", r.label, r.epoch, metric_cells(Some(&r.metrics))).unwrap();
    }
    s
}

pub fn sharpness_detail_csv(report: &SweepReport) -> String {
    let mut s = String::from("label,seed,epoch,direction_seed,sharpness_max,sharpness_mean,nonfinite\n");
    for c in &report.cells {
        if let Ok(r) = &c.outcome {
            for p in &r.landscapes {
                for sl in &p.slices {
                    writeln!(
                        s,
                        "{},{},{},{},{},{},{}",
                        c.label, c.seed, p.epoch, sl.direction_seed, sl.sharpness_max, sl.sharpness_mean, sl.has_nonfinite
                    )
                    .unwrap();
                }
            }
        }
    }
    s
}

pub fn sharpness_summary_csv(report: &SweepReport) -> String {
    let mut s = String::from("label,epoch,sharpness_max,sharpness_mean,cv_sharpness_max,cv_sharpness_mean\n");
    for r in &report.sharpness {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            r.label, r.epoch, r.sharpness_max, r.sharpness_mean, r.cv_sharpness_max, r.cv_sharpness_mean
        )
        .unwrap();
    }
    s
}

pub fn manifest(cfg: &ExperimentConfig, report: &SweepReport) -> String {
    let failed = report.cells.iter().filter(|c| c.outcome.is_err()).count();
    let seeds: Vec<String> = cfg.seeds.iter().map(u64::to_string).collect();
    let mut labels: Vec<&str> = cfg.runs.iter().map(|r| r.label.as_str()).collect();
    labels.sort_unstable();
    format!(
        "sharpkit {}\nconfig_sha256 {}\nseeds {}\nruns {}\ncells {}\nfailed {}\n",
        sharpkit_version(),
        config_hash(cfg),
        seeds.join(" "),
        labels.join(" "),
        report.cells.len(),
        failed
    )
}

pub fn sharpkit_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}
