//! CSV ingestion and dataset resolution.

use std::path::Path;

use sharpkit::data::{self, Dataset};
use sharpkit::Batch;

use crate::config::DatasetConfig;
use crate::error::{HarnessError, Result};

/// Fewest data rows a CSV file may hold.
pub const MIN_ROWS: usize = 4;

/// Reads every row of `path`. Features are all non-score columns in header order.
pub fn load_table(path: &Path, score_column: &str) -> Result<Batch> {
    let table_err = |msg: String| HarnessError::Table { path: path.to_path_buf(), msg };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| table_err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| table_err(e.to_string()))?.clone();
    let score_idx = headers
        .iter()
        .position(|h| h == score_column)
        .ok_or_else(|| table_err(format!("no score column '{score_column}' in header")))?;
    let dim = headers.len() - 1;
    if dim == 0 {
        return Err(table_err("no feature columns".into()));
    }

    let mut inputs = Vec::new();
    let mut scores = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // Row numbers count the header as row 1.
        let row = i + 2;
        let record = record.map_err(|e| table_err(format!("row {row}: {e}")))?;
        if record.len() != headers.len() {
            return Err(table_err(format!(
                "row {row}: expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                table_err(format!("row {row}, column '{}': cannot parse '{cell}' as a number", &headers[c]))
            })?;
            if !v.is_finite() {
                return Err(table_err(format!("row {row}, column '{}': non-finite value", &headers[c])));
            }
            if c == score_idx {
                scores.push(v);
            } else {
                inputs.push(v);
            }
        }
    }
    if scores.len() < MIN_ROWS {
        return Err(table_err(format!("{} data rows, need at least {MIN_ROWS}", scores.len())));
    }
    Ok(Batch::new(inputs, dim, scores)?)
}

/// Reads `path` and splits it into train and test by a seeded shuffle.
pub fn load_csv(path: &Path, score_column: &str, train_fraction: f64, seed: u64) -> Result<Dataset> {
    let all = load_table(path, score_column)?;
    Ok(data::split(&all, train_fraction, seed)?)
}

/// The dataset for one sweep seed. Synthetic data is drawn with that seed;
/// CSV data uses its own fixed split seed so every sweep seed sees the same split.
pub fn resolve(cfg: &DatasetConfig, seed: u64) -> Result<Dataset> {
    match cfg {
        DatasetConfig::Synthetic(spec) => Ok(data::synthesize(spec, seed)?),
        DatasetConfig::Csv { path, score_column, train_fraction, split_seed } => {
            load_csv(path, score_column, *train_fraction, *split_seed)
        }
    }
}
