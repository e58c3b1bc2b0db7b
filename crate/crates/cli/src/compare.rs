//! Side-by-side comparison of two run directories.

use std::fmt;
use std::path::Path;

use anyhow::{bail, Result};

use crate::experiment::final_errors;
use crate::history::{history_file_name, read_history};

#[derive(Debug, Clone)]
pub struct LayerComparison {
    pub layer: usize,
    pub final_a: f64,
    pub best_a: f64,
    pub final_b: f64,
    pub best_b: f64,
}

impl LayerComparison {
    /// Ratio of final errors, `a / b`.
    pub fn ratio(&self) -> f64 {
        self.final_a / self.final_b
    }

    pub fn winner(&self) -> &'static str {
        if self.final_a < self.final_b {
            "a"
        } else if self.final_b < self.final_a {
            "b"
        } else {
            "tie"
        }
    }
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub dir_a: String,
    pub dir_b: String,
    pub layers: Vec<LayerComparison>,
}

impl Comparison {
    /// Machine-readable CSV rendering.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,final_a,best_a,final_b,best_b,ratio,winner\n");
        for layer in &self.layers {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                layer.layer,
                layer.final_a,
                layer.best_a,
                layer.final_b,
                layer.best_b,
                layer.ratio(),
                layer.winner()
            ));
        }
        out
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "a = {}", self.dir_a)?;
        writeln!(f, "b = {}", self.dir_b)?;
        writeln!(
            f,
            "{:<6} {:>14} {:>14} {:>14} {:>14} {:>9} {:>6}",
            "layer", "final_a", "best_a", "final_b", "best_b", "ratio", "winner"
        )?;
        for layer in &self.layers {
            writeln!(
                f,
                "{:<6} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>9.4} {:>6}",
                layer.layer,
                layer.final_a,
                layer.best_a,
                layer.final_b,
                layer.best_b,
                layer.ratio(),
                layer.winner()
            )?;
        }
        Ok(())
    }
}

/// Compare all layer histories present in `dir_a` against `dir_b`.
pub fn compare(dir_a: &Path, dir_b: &Path) -> Result<Comparison> {
    let mut layers = Vec::new();
    for layer in 1.. {
        let file_a = dir_a.join(history_file_name(layer));
        let file_b = dir_b.join(history_file_name(layer));
        match (file_a.is_file(), file_b.is_file()) {
            (false, false) => break,
            (true, true) => {}
            (true, false) => bail!("missing layer history {}", file_b.display()),
            (false, true) => bail!("missing layer history {}", file_a.display()),
        }
        let rows_a = read_history(&file_a)?;
        let rows_b = read_history(&file_b)?;
        let (final_a, best_a) = final_errors(&rows_a)
            .ok_or_else(|| anyhow::anyhow!("{} is empty", file_a.display()))?;
        let (final_b, best_b) = final_errors(&rows_b)
            .ok_or_else(|| anyhow::anyhow!("{} is empty", file_b.display()))?;
        layers.push(LayerComparison {
            layer,
            final_a,
            best_a,
            final_b,
            best_b,
        });
    }
    if layers.is_empty() {
        bail!(
            "no layer histories found in {} and {}",
            dir_a.display(),
            dir_b.display()
        );
    }
    Ok(Comparison {
        dir_a: dir_a.display().to_string(),
        dir_b: dir_b.display().to_string(),
        layers,
    })
}
