//! Repeated runs with derived seeds plus per-generation aggregates.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::experiment::run_experiment;
use crate::history::{history_file_name, read_history, HistoryRow};
use crate::profile::ExperimentProfile;

#[derive(Debug, Clone)]
pub struct BatchArtifacts {
    pub run_dirs: Vec<PathBuf>,
    pub aggregates: Vec<PathBuf>,
}

/// Run `repetitions` copies of the profile; repetition `i` (0-based) uses
/// `seed + i` and writes into `rep{i:03}/`. Per-layer aggregates of f_best
/// (mean, median, min, max per generation) land in
/// `aggregate_layer{k}.csv`.
pub fn batch(profile: &ExperimentProfile, repetitions: usize) -> Result<BatchArtifacts> {
    anyhow::ensure!(repetitions >= 1, "need at least one repetition");
    profile.validate()?;
    fs::create_dir_all(&profile.out_dir)
        .with_context(|| format!("cannot create {}", profile.out_dir.display()))?;

    let mut run_dirs = Vec::with_capacity(repetitions);
    let mut layer_count = 0;
    for rep in 0..repetitions {
        let mut rep_profile = profile.clone();
        rep_profile.seed = profile.seed.wrapping_add(rep as u64);
        rep_profile.out_dir = profile.out_dir.join(format!("rep{rep:03}"));
        let artifacts = run_experiment(&rep_profile)?;
        layer_count = layer_count.max(artifacts.histories.len());
        run_dirs.push(artifacts.out_dir);
    }

    let mut aggregates = Vec::with_capacity(layer_count);
    for layer in 1..=layer_count {
        let histories: Vec<Vec<HistoryRow>> = run_dirs
            .iter()
            .map(|dir| read_history(&dir.join(history_file_name(layer))))
            .collect::<Result<_>>()?;
        let path = profile.out_dir.join(format!("aggregate_layer{layer}.csv"));
        write_aggregate(&path, &histories)?;
        aggregates.push(path);
    }
    Ok(BatchArtifacts {
        run_dirs,
        aggregates,
    })
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Aggregate f_best across repetitions, per generation. Repetitions that
/// stopped early simply drop out of later rows.
fn write_aggregate(path: &Path, histories: &[Vec<HistoryRow>]) -> Result<()> {
    let longest = histories.iter().map(Vec::len).max().unwrap_or(0);
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record(["generation", "runs", "mean", "median", "min", "max"])?;
    for row_index in 0..longest {
        let mut values: Vec<f64> = histories
            .iter()
            .filter_map(|rows| rows.get(row_index).map(|r| r.f_best))
            .collect();
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
        let generation = histories
            .iter()
            .find_map(|rows| rows.get(row_index).map(|r| r.generation))
            .expect("row exists in some history");
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        writer.write_record([
            generation.to_string(),
            values.len().to_string(),
            format!("{mean}"),
            format!("{}", median(&values)),
            format!("{}", values[0]),
            format!("{}", values[values.len() - 1]),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
