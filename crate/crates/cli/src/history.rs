//! Per-iteration history CSV: one row per executed generation or epoch.
//!
//! Columns: `generation,f_best,sigma_norm,beta1,beta2,restarted,
//! evals_cumulative`. Optimizer-specific columns are left empty for CD
//! runs. Values use `.` decimals and rows end with a line feed.

use std::path::Path;

use anyhow::{bail, Context, Result};
use lea_mvd::optimizer::GenerationRecord;

/// One CSV row; `None` renders as an empty field.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub generation: usize,
    pub f_best: f64,
    pub sigma_norm: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub restarted: Option<bool>,
    pub evals_cumulative: u64,
}

impl From<&GenerationRecord> for HistoryRow {
    fn from(record: &GenerationRecord) -> Self {
        HistoryRow {
            generation: record.generation,
            f_best: record.f_best,
            sigma_norm: Some(record.sigma_norm),
            beta1: Some(record.beta1),
            beta2: Some(record.beta2),
            restarted: Some(record.restarted),
            evals_cumulative: record.evals_cumulative,
        }
    }
}

impl HistoryRow {
    /// Row for one CD epoch: the optimizer columns stay empty and one
    /// epoch counts as one training pass.
    pub fn for_epoch(epoch: usize, error: f64) -> Self {
        HistoryRow {
            generation: epoch,
            f_best: error,
            sigma_norm: None,
            beta1: None,
            beta2: None,
            restarted: None,
            evals_cumulative: epoch as u64,
        }
    }
}

const HEADER: [&str; 7] = [
    "generation",
    "f_best",
    "sigma_norm",
    "beta1",
    "beta2",
    "restarted",
    "evals_cumulative",
];

fn float_field(value: Option<f64>) -> String {
    value.map(|v| format!("{v}")).unwrap_or_default()
}

pub fn write_history(path: &Path, rows: &[HistoryRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record(HEADER)?;
    for row in rows {
        writer.write_record([
            row.generation.to_string(),
            format!("{}", row.f_best),
            float_field(row.sigma_norm),
            float_field(row.beta1),
            float_field(row.beta2),
            row.restarted
                .map(|r| u8::from(r).to_string())
                .unwrap_or_default(),
            row.evals_cumulative.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn parse_optional<T: std::str::FromStr>(field: &str) -> Result<Option<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    if field.is_empty() {
        Ok(None)
    } else {
        Ok(Some(field.parse()?))
    }
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryRow>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != HEADER.len() {
            bail!(
                "{}: expected {} fields, found {}",
                path.display(),
                HEADER.len(),
                record.len()
            );
        }
        rows.push(HistoryRow {
            generation: record[0].parse()?,
            f_best: record[1].parse()?,
            sigma_norm: parse_optional(&record[2])?,
            beta1: parse_optional(&record[3])?,
            beta2: parse_optional(&record[4])?,
            restarted: parse_optional::<u8>(&record[5])?.map(|v| v != 0),
            evals_cumulative: record[6].parse()?,
        });
    }
    Ok(rows)
}

/// Name of the per-layer history file inside a run directory.
pub fn history_file_name(layer: usize) -> String {
    format!("history_layer{layer}.csv")
}

/// Name of the per-layer checkpoint file inside a run directory.
pub fn checkpoint_file_name(layer: usize) -> String {
    format!("rbm_layer{layer}.ckpt")
}
