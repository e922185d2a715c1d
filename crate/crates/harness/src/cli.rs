//! Command-line interface.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sharpkit::landscape::{probe, summarize};
use sharpkit::{checkpoint, metrics, LossKind, LossSpec};

use crate::config::{ExperimentConfig, LandscapeConfig};
use crate::dataset::load_table;
use crate::error::{io_err, HarnessError, Result};
use crate::sweep::{self, run_cell, run_sweep};

#[derive(Debug, Parser)]
#[command(name = "sharpkit", version, about = "Weight-perturbation training and loss-landscape probing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one run for one seed and write its metrics, checkpoints and landscapes.
    Train(TrainArgs),
    /// Train every run for every seed and write the aggregate reports.
    Sweep(SweepArgs),
    /// Slice the loss of a checkpoint along random filter-normalized directions.
    Landscape(LandscapeArgs),
    /// Print SRCC and PLCC of a checkpoint on a CSV file.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Run label from the config; defaults to the first run.
    #[arg(long)]
    pub run: Option<String>,
    /// Defaults to the first seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Defaults to `<output_dir>/runs/<label>/seed<seed>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replace the config's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LandscapeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "score")]
    pub score_column: String,
    /// Take the loss and landscape settings from this experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Loss kind when no config is given.
    #[arg(long)]
    pub loss: Option<LossKind>,
    #[arg(long)]
    pub n_directions: Option<usize>,
    /// First direction seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "checkpoint")]
    pub label: String,
    #[arg(long, default_value = "landscape-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "score")]
    pub score_column: String,
}

/// Parses `argv` and runs the command. Returns the process exit code: 0 on
/// success, 1 on a runtime error and 2 on a usage error.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs a parsed command and returns what it would print.
pub fn execute(command: Command) -> Result<String> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Landscape(a) => cmd_landscape(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

fn cmd_train(a: TrainArgs) -> Result<String> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let run = match &a.run {
        Some(label) => cfg
            .run(label)
            .ok_or_else(|| HarnessError::Config(format!("no run labelled '{label}'")))?,
        None => &cfg.runs[0],
    };
    let seed = a.seed.unwrap_or(cfg.seeds[0]);
    let out = a.out.unwrap_or_else(|| sweep::cell_dir(&cfg.output_dir, &run.label, seed));
    let result = run_cell(&cfg, run, seed, Some(&out))?;
    let m = result.last();
    let mut s = String::new();
    writeln!(
        s,
        "{} seed {} epoch {}: train srcc {:.4} test srcc {:.4} gap {:.4}",
        run.label, seed, m.epoch, m.train.srcc, m.test.srcc, m.gap.srcc_gap
    )
    .unwrap();
    writeln!(s, "wrote {}", out.display()).unwrap();
    Ok(s)
}

fn cmd_sweep(a: SweepArgs) -> Result<String> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = a.out {
        cfg.output_dir = out;
    }
    let report = run_sweep(&cfg)?;
    let mut s = sweep::summary_csv(&report);
    writeln!(s, "wrote {}", cfg.output_dir.display()).unwrap();
    Ok(s)
}

fn read_checkpoint(path: &Path) -> Result<sharpkit::MlpModel> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    checkpoint::from_str(&text).map_err(|e| HarnessError::Table { path: path.to_path_buf(), msg: e.to_string() })
}

fn cmd_landscape(a: LandscapeArgs) -> Result<String> {
    let model = read_checkpoint(&a.checkpoint)?;
    let data = load_table(&a.data, &a.score_column)?;
    let (loss, mut settings) = match &a.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            (cfg.train.loss, cfg.landscape)
        }
        None => (LossSpec::of_kind(a.loss.unwrap_or(LossKind::PlccRank)), LandscapeConfig::default()),
    };
    if let Some(n) = a.n_directions {
        settings.n_direction_seeds = n;
    }
    if let Some(seed) = a.seed {
        settings.first_direction_seed = seed;
    }
    let slices = probe(&model.mlp, &model.params, &data, &loss, &settings.grid(), &settings.direction_seeds())?;
    let summary = summarize(&slices)?;

    std::fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let mut table = String::from("label,direction_seed,sharpness_max,sharpness_mean,nonfinite\n");
    for s in &slices {
        let path = a.out.join(format!("dir{}.csv", s.direction_seed));
        std::fs::write(&path, sweep::slice_csv(&a.label, s)).map_err(io_err(&path))?;
        writeln!(table, "{},{},{},{},{}", a.label, s.direction_seed, s.sharpness_max, s.sharpness_mean, s.has_nonfinite)
            .unwrap();
    }
    let path = a.out.join("sharpness.csv");
    std::fs::write(&path, &table).map_err(io_err(&path))?;

    let mut s = String::new();
    writeln!(s, "directions {}", summary.n_directions).unwrap();
    writeln!(s, "mean sharpness_max {} (cv {:.3})", summary.mean_sharpness_max, summary.cv_sharpness_max).unwrap();
    writeln!(s, "mean sharpness_mean {} (cv {:.3})", summary.mean_sharpness_mean, summary.cv_sharpness_mean).unwrap();
    writeln!(s, "wrote {}", a.out.display()).unwrap();
    Ok(s)
}

fn cmd_eval(a: EvalArgs) -> Result<String> {
    let model = read_checkpoint(&a.checkpoint)?;
    let data = load_table(&a.data, &a.score_column)?;
    let pred = model.predict(&data)?;
    Ok(format!(
        "srcc {}\nplcc {}\n",
        metrics::srcc(&pred, data.scores())?,
        metrics::plcc(&pred, data.scores())?
    ))
}
