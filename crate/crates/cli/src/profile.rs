//! Experiment profiles and their flat key-value representation.
//!
//! The same `key = value` format serves as optional config file input
//! (flags override file values) and as the `run.meta` record written next
//! to every run's artifacts, so any run can be replayed from its metadata.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use lea_mvd::rbm::DbnSpec;

pub const DATA_DIR_ENV: &str = "LEA_MVD_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileName {
    Small7x7,
    Full28x28,
    Synthetic,
}

impl ProfileName {
    pub fn dbn_spec(&self) -> Option<DbnSpec> {
        match self {
            ProfileName::Small7x7 => Some(DbnSpec::small7x7()),
            ProfileName::Full28x28 => Some(DbnSpec::full28x28()),
            ProfileName::Synthetic => None,
        }
    }
}

impl fmt::Display for ProfileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileName::Small7x7 => "small7x7",
            ProfileName::Full28x28 => "full28x28",
            ProfileName::Synthetic => "synthetic",
        })
    }
}

impl FromStr for ProfileName {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small7x7" => Ok(ProfileName::Small7x7),
            "full28x28" => Ok(ProfileName::Full28x28),
            "synthetic" => Ok(ProfileName::Synthetic),
            other => bail!("unknown profile '{other}' (small7x7, full28x28, synthetic)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainerKind {
    Cd,
    LeaMvd,
    LeaMvdSeededByCd,
}

impl fmt::Display for TrainerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainerKind::Cd => "cd",
            TrainerKind::LeaMvd => "lea-mvd",
            TrainerKind::LeaMvdSeededByCd => "lea-mvd-seeded-by-cd",
        })
    }
}

impl FromStr for TrainerKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cd" => Ok(TrainerKind::Cd),
            "lea-mvd" => Ok(TrainerKind::LeaMvd),
            "lea-mvd-seeded-by-cd" => Ok(TrainerKind::LeaMvdSeededByCd),
            other => bail!("unknown trainer '{other}' (cd, lea-mvd, lea-mvd-seeded-by-cd)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticFn {
    Sphere,
    Ellipsoid,
    Rosenbrock,
    Constant,
}

impl SyntheticFn {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            SyntheticFn::Sphere => lea_mvd::objectives::sphere(x),
            SyntheticFn::Ellipsoid => lea_mvd::objectives::ellipsoid(x),
            SyntheticFn::Rosenbrock => lea_mvd::objectives::rosenbrock(x),
            SyntheticFn::Constant => 0.0,
        }
    }
}

impl fmt::Display for SyntheticFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SyntheticFn::Sphere => "sphere",
            SyntheticFn::Ellipsoid => "ellipsoid",
            SyntheticFn::Rosenbrock => "rosenbrock",
            SyntheticFn::Constant => "constant",
        })
    }
}

impl FromStr for SyntheticFn {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(SyntheticFn::Sphere),
            "ellipsoid" => Ok(SyntheticFn::Ellipsoid),
            "rosenbrock" => Ok(SyntheticFn::Rosenbrock),
            "constant" => Ok(SyntheticFn::Constant),
            other => bail!(
                "unknown function '{other}' (sphere, ellipsoid, rosenbrock, constant)"
            ),
        }
    }
}

/// Everything a single experiment run needs.
#[derive(Debug, Clone)]
pub struct ExperimentProfile {
    pub name: ProfileName,
    pub trainer: TrainerKind,
    /// Iterations per layer: CD epochs or optimizer generations.
    pub budget: usize,
    pub seed: u64,
    pub data_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Training rows sampled from the full set (None = use everything).
    pub subset: Option<usize>,
    /// Cap on the evaluation subset used for reconstruction errors.
    pub eval_subset: usize,
    pub lambda: usize,
    pub n_elite: usize,
    /// Synthetic profile only.
    pub function: SyntheticFn,
    /// Synthetic profile only.
    pub n_var: usize,
}

impl ExperimentProfile {
    pub fn new(name: ProfileName, out_dir: PathBuf) -> Self {
        ExperimentProfile {
            name,
            trainer: match name {
                ProfileName::Synthetic => TrainerKind::LeaMvd,
                _ => TrainerKind::LeaMvdSeededByCd,
            },
            budget: 50,
            seed: 0,
            data_dir: None,
            out_dir,
            subset: Some(2000),
            eval_subset: 2000,
            lambda: 24,
            n_elite: 4,
            function: SyntheticFn::Sphere,
            n_var: 1000,
        }
    }

    /// Search bounds: the RBM experiments initialize inside [-0.1, 0.1],
    /// the synthetic profile inside [-5, 5].
    pub fn bounds(&self) -> (f64, f64) {
        match self.name {
            ProfileName::Synthetic => (-5.0, 5.0),
            _ => (-0.1, 0.1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            bail!("budget must be positive");
        }
        if self.n_elite == 0 || self.n_elite >= self.lambda {
            bail!(
                "need 1 <= n-elite < lambda, got n-elite = {}, lambda = {}",
                self.n_elite,
                self.lambda
            );
        }
        if self.name == ProfileName::Synthetic && self.trainer != TrainerKind::LeaMvd {
            bail!("the synthetic profile only supports trainer = lea-mvd");
        }
        if self.name != ProfileName::Synthetic && self.eval_subset == 0 {
            bail!("eval-subset must be positive");
        }
        Ok(())
    }

    /// Resolve the dataset directory: explicit flag/config value first,
    /// then the `LEA_MVD_DATA_DIR` environment variable.
    pub fn resolve_data_dir(&self) -> Result<PathBuf> {
        if let Some(dir) = &self.data_dir {
            return Ok(dir.clone());
        }
        if let Ok(dir) = std::env::var(DATA_DIR_ENV) {
            return Ok(PathBuf::from(dir));
        }
        bail!(
            "no data directory: pass --data-dir, set {} in a config file, \
             or export {DATA_DIR_ENV}",
            "data-dir"
        )
    }

    /// Key-value view of the replayable fields, in stable order.
    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let mut kv = BTreeMap::new();
        kv.insert("profile".into(), self.name.to_string());
        kv.insert("trainer".into(), self.trainer.to_string());
        kv.insert("budget".into(), self.budget.to_string());
        kv.insert("seed".into(), self.seed.to_string());
        if let Some(dir) = &self.data_dir {
            kv.insert("data-dir".into(), dir.display().to_string());
        }
        if let Some(subset) = self.subset {
            kv.insert("subset".into(), subset.to_string());
        }
        kv.insert("eval-subset".into(), self.eval_subset.to_string());
        kv.insert("lambda".into(), self.lambda.to_string());
        kv.insert("n-elite".into(), self.n_elite.to_string());
        if self.name == ProfileName::Synthetic {
            kv.insert("function".into(), self.function.to_string());
            kv.insert("n-var".into(), self.n_var.to_string());
        }
        kv
    }

    /// Apply one `key = value` pair (config file or metadata).
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        let parse = |what: &str| format!("invalid value '{value}' for {what}");
        match key {
            "profile" => self.name = value.parse()?,
            "trainer" => self.trainer = value.parse()?,
            "budget" => self.budget = value.parse().with_context(|| parse("budget"))?,
            "seed" => self.seed = value.parse().with_context(|| parse("seed"))?,
            "data-dir" => self.data_dir = Some(PathBuf::from(value)),
            "out" => self.out_dir = PathBuf::from(value),
            "subset" => self.subset = Some(value.parse().with_context(|| parse("subset"))?),
            "eval-subset" => {
                self.eval_subset = value.parse().with_context(|| parse("eval-subset"))?
            }
            "lambda" => self.lambda = value.parse().with_context(|| parse("lambda"))?,
            "n-elite" => self.n_elite = value.parse().with_context(|| parse("n-elite"))?,
            "function" => self.function = value.parse()?,
            "n-var" => self.n_var = value.parse().with_context(|| parse("n-var"))?,
            _ => {} // informational metadata keys are ignored on replay
        }
        Ok(())
    }

    /// Load replayable fields from a config or `run.meta` file.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        for (key, value) in parse_kv_file(path)? {
            self.apply_kv(&key, &value)
                .with_context(|| format!("{}: key '{key}'", path.display()))?;
        }
        Ok(())
    }
}

/// Parse a flat `key = value` file; `#` starts a comment.
pub fn parse_kv_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut pairs = Vec::new();
    for (number, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected 'key = value'", path.display(), number + 1))?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}
