//! End-to-end checks of the experiment harness: artifacts, determinism,
//! comparison, batching, and metadata replay.

use std::fs;
use std::path::{Path, PathBuf};

use lea_mvd_cli::history::{history_file_name, read_history};
use lea_mvd_cli::profile::{ExperimentProfile, ProfileName, SyntheticFn, TrainerKind};
use lea_mvd_cli::{batch, compare, run_experiment};

fn synthetic_profile(out: PathBuf) -> ExperimentProfile {
    let mut profile = ExperimentProfile::new(ProfileName::Synthetic, out);
    profile.budget = 25;
    profile.n_var = 50;
    profile.seed = 11;
    profile
}

fn small_profile(out: PathBuf) -> ExperimentProfile {
    let mut profile = ExperimentProfile::new(ProfileName::Small7x7, out);
    profile.data_dir = Some(lea_mvd_testdata::ensure_dataset());
    profile.trainer = TrainerKind::LeaMvdSeededByCd;
    profile.budget = 4;
    profile.subset = Some(120);
    profile.seed = 5;
    profile
}

fn read_to_bytes(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap()
}

#[test]
fn synthetic_run_writes_a_monotone_history() {
    let dir = tempfile::tempdir().unwrap();
    let profile = synthetic_profile(dir.path().join("run"));
    let artifacts = run_experiment(&profile).unwrap();
    assert_eq!(artifacts.histories.len(), 1);
    assert!(artifacts.checkpoints.is_empty());
    let rows = read_history(&artifacts.histories[0]).unwrap();
    assert!(rows.len() <= profile.budget);
    assert_eq!(rows.len(), 25, "budget fully used on a smooth objective");
    for pair in rows.windows(2) {
        assert!(pair[1].f_best <= pair[0].f_best, "f_best must not increase");
    }
    assert!(artifacts.meta.is_file());
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_experiment(&synthetic_profile(dir.path().join("a"))).unwrap();
    let b = run_experiment(&synthetic_profile(dir.path().join("b"))).unwrap();
    assert_eq!(
        read_to_bytes(&a.histories[0]),
        read_to_bytes(&b.histories[0]),
        "same seed must reproduce identical CSV bytes"
    );
}

#[test]
fn small7x7_run_produces_three_layers_of_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let profile = small_profile(dir.path().join("run"));
    let artifacts = run_experiment(&profile).unwrap();
    assert_eq!(artifacts.histories.len(), 3);
    assert_eq!(artifacts.checkpoints.len(), 3);
    for (k, path) in artifacts.checkpoints.iter().enumerate() {
        let file = fs::File::open(path).unwrap();
        let rbm = lea_mvd::rbm::Rbm::read_checkpoint(std::io::BufReader::new(file)).unwrap();
        let expected = [(49, 30), (30, 30), (30, 120)][k];
        assert_eq!((rbm.n_visible, rbm.n_hidden), expected);
    }
    let rows = read_history(&artifacts.histories[0]).unwrap();
    assert_eq!(rows.len(), profile.budget);
    // Optimizer histories carry the model columns.
    assert!(rows[0].sigma_norm.is_some());
    assert!(rows[0].beta1.is_some());
}

#[test]
fn cd_histories_leave_optimizer_columns_empty() {
    let dir = tempfile::tempdir().unwrap();
    let mut profile = small_profile(dir.path().join("run"));
    profile.trainer = TrainerKind::Cd;
    let artifacts = run_experiment(&profile).unwrap();
    let rows = read_history(&artifacts.histories[0]).unwrap();
    assert_eq!(rows.len(), profile.budget);
    assert!(rows[0].sigma_norm.is_none());
    assert!(rows[0].beta1.is_none());
    assert_eq!(rows[0].evals_cumulative, 1);
    assert_eq!(rows.last().unwrap().evals_cumulative, profile.budget as u64);
}

#[test]
fn comparison_of_identical_directories_is_a_tie() {
    let dir = tempfile::tempdir().unwrap();
    let artifacts = run_experiment(&synthetic_profile(dir.path().join("run"))).unwrap();
    let comparison = compare(&artifacts.out_dir, &artifacts.out_dir).unwrap();
    assert_eq!(comparison.layers.len(), 1);
    assert_eq!(comparison.layers[0].ratio(), 1.0);
    assert_eq!(comparison.layers[0].winner(), "tie");
    let csv = comparison.to_csv();
    assert!(csv.starts_with("layer,final_a,best_a,final_b,best_b,ratio,winner\n"));
}

#[test]
fn comparison_reports_the_missing_layer_file() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_experiment(&small_profile(dir.path().join("a"))).unwrap();
    let b = run_experiment(&small_profile(dir.path().join("b"))).unwrap();
    let removed = b.out_dir.join(history_file_name(3));
    fs::remove_file(&removed).unwrap();
    let error = compare(&a.out_dir, &b.out_dir).unwrap_err();
    assert!(
        error.to_string().contains(&history_file_name(3)),
        "error should name the missing file: {error}"
    );
}

#[test]
fn single_repetition_batch_matches_its_run() {
    let dir = tempfile::tempdir().unwrap();
    let profile = synthetic_profile(dir.path().join("batch"));
    let artifacts = batch(&profile, 1).unwrap();
    assert_eq!(artifacts.run_dirs.len(), 1);
    assert_eq!(artifacts.aggregates.len(), 1);
    let rows = read_history(&artifacts.run_dirs[0].join(history_file_name(1))).unwrap();
    let aggregate = fs::read_to_string(&artifacts.aggregates[0]).unwrap();
    let mut lines = aggregate.lines();
    assert_eq!(
        lines.next().unwrap(),
        "generation,runs,mean,median,min,max"
    );
    for (line, row) in lines.zip(rows.iter()) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], row.generation.to_string());
        assert_eq!(fields[1], "1");
        for value in &fields[2..] {
            assert_eq!(value.parse::<f64>().unwrap(), row.f_best);
        }
    }
}

#[test]
fn constant_objective_batch_has_zero_variance() {
    let dir = tempfile::tempdir().unwrap();
    let mut profile = synthetic_profile(dir.path().join("batch"));
    profile.function = SyntheticFn::Constant;
    profile.budget = 6;
    let artifacts = batch(&profile, 5).unwrap();
    assert_eq!(artifacts.run_dirs.len(), 5);
    let aggregate = fs::read_to_string(&artifacts.aggregates[0]).unwrap();
    for line in aggregate.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[1], "5");
        let (min, max): (f64, f64) = (fields[4].parse().unwrap(), fields[5].parse().unwrap());
        assert_eq!(min, 0.0);
        assert_eq!(max, 0.0);
    }
}

#[test]
fn batch_repetitions_use_derived_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let profile = synthetic_profile(dir.path().join("batch"));
    let artifacts = batch(&profile, 2).unwrap();
    // Repetition 0 uses the base seed: identical to a plain run.
    let mut single = synthetic_profile(dir.path().join("single"));
    single.seed = profile.seed;
    let single_run = run_experiment(&single).unwrap();
    assert_eq!(
        read_to_bytes(&artifacts.run_dirs[0].join(history_file_name(1))),
        read_to_bytes(&single_run.histories[0])
    );
    // Repetition 1 uses seed + 1: a different trajectory.
    assert_ne!(
        read_to_bytes(&artifacts.run_dirs[0].join(history_file_name(1))),
        read_to_bytes(&artifacts.run_dirs[1].join(history_file_name(1)))
    );
}

#[test]
fn runs_replay_from_their_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let original = run_experiment(&small_profile(dir.path().join("orig"))).unwrap();

    let mut replayed = ExperimentProfile::new(ProfileName::Synthetic, dir.path().join("replay"));
    replayed.apply_file(&original.meta).unwrap();
    replayed.out_dir = dir.path().join("replay");
    let replay = run_experiment(&replayed).unwrap();

    assert_eq!(original.histories.len(), replay.histories.len());
    for (a, b) in original.histories.iter().zip(replay.histories.iter()) {
        assert_eq!(
            read_to_bytes(a),
            read_to_bytes(b),
            "replayed run must reproduce {}",
            a.display()
        );
    }
}

#[test]
fn config_file_values_are_applied() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config");
    fs::write(
        &config_path,
        "# comment\nprofile = synthetic\nfunction = rosenbrock\nn-var = 17\nbudget = 9\nseed = 3\n",
    )
    .unwrap();
    let mut profile = ExperimentProfile::new(ProfileName::Synthetic, dir.path().join("out"));
    profile.apply_file(&config_path).unwrap();
    assert_eq!(profile.function, SyntheticFn::Rosenbrock);
    assert_eq!(profile.n_var, 17);
    assert_eq!(profile.budget, 9);
    assert_eq!(profile.seed, 3);
}

#[test]
fn missing_data_directory_is_a_clear_error() {
    if std::env::var(lea_mvd_cli::profile::DATA_DIR_ENV).is_ok() {
        return; // ambient environment provides a fallback; nothing to test
    }
    let dir = tempfile::tempdir().unwrap();
    let mut profile = ExperimentProfile::new(ProfileName::Small7x7, dir.path().join("out"));
    profile.data_dir = None;
    let error = run_experiment(&profile).unwrap_err();
    assert!(error.to_string().contains("data"), "got: {error}");
}

#[test]
fn invalid_profile_combinations_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut profile = synthetic_profile(dir.path().join("out"));
    profile.trainer = TrainerKind::Cd;
    assert!(run_experiment(&profile).is_err());

    let mut profile = synthetic_profile(dir.path().join("out2"));
    profile.n_elite = profile.lambda;
    assert!(run_experiment(&profile).is_err());
}
