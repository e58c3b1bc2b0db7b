//! Experiment harness around the LEA-MVD optimizer: reproducible runs on
//! synthetic functions and on DBN pretraining, with per-iteration CSV
//! histories, RBM checkpoints, and replayable run metadata.

pub mod batch;
pub mod compare;
pub mod experiment;
pub mod history;
pub mod profile;

pub use batch::batch;
pub use compare::{compare, Comparison};
pub use experiment::run_experiment;
pub use profile::{ExperimentProfile, ProfileName, SyntheticFn, TrainerKind};
