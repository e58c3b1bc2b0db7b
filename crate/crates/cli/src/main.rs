//! `lea-mvd`: experiment harness CLI.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use lea_mvd_cli::profile::{ExperimentProfile, ProfileName, SyntheticFn, TrainerKind};
use lea_mvd_cli::{batch, compare, run_experiment};

#[derive(Parser)]
#[command(
    name = "lea-mvd",
    about = "Linear-memory evolutionary optimizer benchmark harness",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one experiment run and write its artifacts.
    Run(RunArgs),
    /// Compare the layer histories of two run directories.
    Compare(CompareArgs),
    /// Run a profile several times with derived seeds and aggregate.
    Batch(BatchArgs),
}

#[derive(Args)]
struct ProfileArgs {
    /// Experiment profile: small7x7, full28x28, or synthetic.
    #[arg(long)]
    profile: Option<ProfileName>,
    /// Trainer: cd, lea-mvd, or lea-mvd-seeded-by-cd.
    #[arg(long)]
    trainer: Option<TrainerKind>,
    /// Iterations per layer (CD epochs / optimizer generations).
    #[arg(long)]
    budget: Option<usize>,
    /// Base RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory holding the IDX data files (.gz accepted).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Output directory for run artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of training images sampled from the full set.
    #[arg(long)]
    subset: Option<usize>,
    /// Population size of the optimizer.
    #[arg(long)]
    lambda: Option<usize>,
    /// Number of elite individuals carried over each generation.
    #[arg(long)]
    n_elite: Option<usize>,
    /// Synthetic profile objective: sphere, ellipsoid, rosenbrock, constant.
    #[arg(long)]
    function: Option<SyntheticFn>,
    /// Synthetic profile dimensionality.
    #[arg(long)]
    n_var: Option<usize>,
    /// Flat key-value config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ProfileArgs {
    fn build(&self) -> Result<ExperimentProfile> {
        let mut profile = ExperimentProfile::new(
            self.profile.unwrap_or(ProfileName::Synthetic),
            PathBuf::from("runs/out"),
        );
        if let Some(path) = &self.config {
            profile.apply_file(path)?;
        }
        // Flags override config-file values.
        if let Some(name) = self.profile {
            profile.name = name;
            if name == ProfileName::Synthetic {
                profile.trainer = TrainerKind::LeaMvd;
            }
        }
        if let Some(trainer) = self.trainer {
            profile.trainer = trainer;
        }
        if let Some(budget) = self.budget {
            profile.budget = budget;
        }
        if let Some(seed) = self.seed {
            profile.seed = seed;
        }
        if let Some(dir) = &self.data_dir {
            profile.data_dir = Some(dir.clone());
        }
        if let Some(out) = &self.out {
            profile.out_dir = out.clone();
        }
        if let Some(subset) = self.subset {
            profile.subset = Some(subset);
        }
        if let Some(lambda) = self.lambda {
            profile.lambda = lambda;
        }
        if let Some(n_elite) = self.n_elite {
            profile.n_elite = n_elite;
        }
        if let Some(function) = self.function {
            profile.function = function;
        }
        if let Some(n_var) = self.n_var {
            profile.n_var = n_var;
        }
        Ok(profile)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    profile: ProfileArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// First run directory.
    run_dir_a: PathBuf,
    /// Second run directory.
    run_dir_b: PathBuf,
    /// Print a machine-readable CSV table instead of the text table.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    profile: ProfileArgs,
    /// Number of repetitions; repetition i uses seed + i.
    #[arg(long, default_value_t = 1)]
    reps: usize,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => {
            let profile = args.profile.build()?;
            let artifacts = run_experiment(&profile)?;
            println!("run complete: {}", artifacts.out_dir.display());
            for path in &artifacts.histories {
                println!("  history    {}", path.display());
            }
            for path in &artifacts.checkpoints {
                println!("  checkpoint {}", path.display());
            }
            println!("  meta       {}", artifacts.meta.display());
            Ok(())
        }
        Command::Compare(args) => {
            let comparison = compare(&args.run_dir_a, &args.run_dir_b)?;
            if args.csv {
                print!("{}", comparison.to_csv());
            } else {
                print!("{comparison}");
            }
            Ok(())
        }
        Command::Batch(args) => {
            let profile = args.profile.build()?;
            let artifacts = batch(&profile, args.reps)?;
            println!("batch complete: {} runs", artifacts.run_dirs.len());
            for path in &artifacts.aggregates {
                println!("  aggregate {}", path.display());
            }
            Ok(())
        }
    }
}
