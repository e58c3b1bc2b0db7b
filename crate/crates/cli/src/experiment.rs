//! Execution of one experiment run: data preparation, training, and the
//! on-disk artifacts (history CSVs, checkpoints, `run.meta`).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lea_mvd::dataio::{self, Dataset};
use lea_mvd::optimizer::{self, OptimizerConfig};
use lea_mvd::rbm::{pretrain_dbn, CdConfig, DbnSpec, LayerOutcome, LayerTrainer, LeaMvdSettings};

use crate::history::{checkpoint_file_name, history_file_name, write_history, HistoryRow};
use crate::profile::{ExperimentProfile, ProfileName, TrainerKind};

/// Seeds derived from the profile seed, in a fixed draw order so the same
/// base seed selects the same data regardless of the trainer.
#[derive(Debug, Clone, Copy)]
pub struct DerivedSeeds {
    pub subset: u64,
    pub eval: u64,
    pub cd_base: u64,
    pub opt_base: u64,
}

impl DerivedSeeds {
    pub fn from_base(base: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(base);
        DerivedSeeds {
            subset: rng.gen(),
            eval: rng.gen(),
            cd_base: rng.gen(),
            opt_base: rng.gen(),
        }
    }
}

/// Paths written by a successful run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub histories: Vec<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    pub meta: PathBuf,
}

const BINARIZE_THRESHOLD: f64 = 0.5;

fn load_training_data(profile: &ExperimentProfile, seeds: &DerivedSeeds) -> Result<Dataset> {
    let data_dir = profile.resolve_data_dir()?;
    let images_path = resolve_idx_file(&data_dir, "train-images-idx3-ubyte")?;
    let raw = dataio::load_idx(&images_path, None)
        .with_context(|| format!("loading {}", images_path.display()))?;
    let mut dataset = dataio::binarize(&raw, BINARIZE_THRESHOLD);
    if profile.name == ProfileName::Small7x7 {
        dataset = dataio::downscale_7x7(&dataset)?;
    }
    if let Some(count) = profile.subset {
        if count < dataset.count() {
            dataset = dataio::subset(&dataset, count, seeds.subset)?;
        }
    }
    Ok(dataset)
}

/// Accept both plain and gzip-compressed IDX files.
fn resolve_idx_file(dir: &Path, stem: &str) -> Result<PathBuf> {
    let plain = dir.join(stem);
    if plain.is_file() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{stem}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    anyhow::bail!(
        "missing data file {} (or .gz) in {}",
        stem,
        dir.display()
    )
}

fn build_trainer(profile: &ExperimentProfile, seeds: &DerivedSeeds) -> LayerTrainer {
    let cd = CdConfig {
        epochs: profile.budget,
        rng_seed: seeds.cd_base,
        ..CdConfig::default()
    };
    let (x_inf, x_sup) = profile.bounds();
    let opt = LeaMvdSettings {
        lambda: profile.lambda,
        n_elite: profile.n_elite,
        n_gen: profile.budget,
        x_inf,
        x_sup,
        rng_seed: seeds.opt_base,
    };
    match profile.trainer {
        TrainerKind::Cd => LayerTrainer::Cd(cd),
        TrainerKind::LeaMvd => LayerTrainer::LeaMvd(opt),
        TrainerKind::LeaMvdSeededByCd => LayerTrainer::LeaMvdSeededByCd { cd, opt },
    }
}

fn layer_rows(outcome: &LayerOutcome) -> Vec<HistoryRow> {
    match &outcome.history {
        Some(history) => history.iter().map(HistoryRow::from).collect(),
        None => outcome
            .errors
            .iter()
            .enumerate()
            .map(|(i, &error)| HistoryRow::for_epoch(i + 1, error))
            .collect(),
    }
}

fn write_meta(
    profile: &ExperimentProfile,
    seeds: &DerivedSeeds,
    spec: Option<&DbnSpec>,
    path: &Path,
) -> Result<()> {
    let mut text = String::from("# lea-mvd run metadata (replayable: lea-mvd run --config <this file>)\n");
    for (key, value) in profile.to_kv() {
        text.push_str(&format!("{key} = {value}\n"));
    }
    let (x_inf, x_sup) = profile.bounds();
    text.push_str(&format!("info-bounds = {x_inf}..{x_sup}\n"));
    text.push_str(&format!("info-binarize-threshold = {BINARIZE_THRESHOLD}\n"));
    if profile.name == ProfileName::Small7x7 {
        text.push_str("info-downscale = 4x4-block-mean, threshold 0.5, ties round to 1\n");
    }
    if let Some(spec) = spec {
        let sizes: Vec<String> = spec
            .layers()
            .iter()
            .map(|(v, h)| format!("{v}x{h}"))
            .collect();
        text.push_str(&format!("info-dbn-spec = {}\n", sizes.join(",")));
        let counts: Vec<String> = spec.param_counts().iter().map(|c| c.to_string()).collect();
        text.push_str(&format!("info-param-counts = {}\n", counts.join(",")));
    }
    if profile.name != ProfileName::Synthetic {
        text.push_str(&format!(
            "info-derived-seeds = subset:{} eval:{} cd:{} opt:{}\n",
            seeds.subset, seeds.eval, seeds.cd_base, seeds.opt_base
        ));
        let cd = CdConfig::default();
        text.push_str(&format!(
            "info-cd = learning-rate:{} minibatch:{}\n",
            cd.learning_rate, cd.minibatch_size
        ));
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn run_synthetic(profile: &ExperimentProfile) -> Result<Vec<HistoryRow>> {
    let (x_inf, x_sup) = profile.bounds();
    let mut config = OptimizerConfig::new(profile.n_var, x_inf, x_sup, profile.budget);
    config.lambda = profile.lambda;
    config.n_elite = profile.n_elite;
    config.rng_seed = profile.seed;
    let function = profile.function;
    let objective = move |x: &[f64]| function.evaluate(x);
    let result = optimizer::run(&config, &objective)?;
    Ok(result.history.iter().map(HistoryRow::from).collect())
}

/// Execute one run and write its artifacts into `profile.out_dir`.
pub fn run_experiment(profile: &ExperimentProfile) -> Result<RunArtifacts> {
    profile.validate()?;
    let out_dir = profile.out_dir.clone();
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let seeds = DerivedSeeds::from_base(profile.seed);

    let mut histories = Vec::new();
    let mut checkpoints = Vec::new();
    let spec = profile.name.dbn_spec();

    match &spec {
        None => {
            let rows = run_synthetic(profile)?;
            let path = out_dir.join(history_file_name(1));
            write_history(&path, &rows)?;
            histories.push(path);
        }
        Some(spec) => {
            let dataset = load_training_data(profile, &seeds)?;
            let train = dataset.to_f64();
            let eval_count = profile.eval_subset.min(train.nrows());
            let eval_indices: Vec<usize> = if eval_count == train.nrows() {
                (0..train.nrows()).collect()
            } else {
                dataio::subset_indices(train.nrows(), eval_count, seeds.eval)
            };
            let trainer = build_trainer(profile, &seeds);
            let outcomes = pretrain_dbn(spec, &train, &eval_indices, &trainer)?;
            for (k, outcome) in outcomes.iter().enumerate() {
                let history_path = out_dir.join(history_file_name(k + 1));
                write_history(&history_path, &layer_rows(outcome))?;
                histories.push(history_path);
                let ckpt_path = out_dir.join(checkpoint_file_name(k + 1));
                let file = fs::File::create(&ckpt_path)
                    .with_context(|| format!("cannot create {}", ckpt_path.display()))?;
                outcome.rbm.write_checkpoint(std::io::BufWriter::new(file))?;
                checkpoints.push(ckpt_path);
            }
        }
    }

    let meta = out_dir.join("run.meta");
    write_meta(profile, &seeds, spec.as_ref(), &meta)?;
    Ok(RunArtifacts {
        out_dir,
        histories,
        checkpoints,
        meta,
    })
}

/// Final and best f_best of a history, used by `compare` and the tests.
pub fn final_errors(rows: &[HistoryRow]) -> Option<(f64, f64)> {
    let last = rows.last()?.f_best;
    let best = rows.iter().map(|r| r.f_best).fold(f64::INFINITY, f64::min);
    Some((last, best))
}
