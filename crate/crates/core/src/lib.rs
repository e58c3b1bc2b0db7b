//! LEA-MVD: a linear-memory evolutionary optimizer for high-dimensional
//! continuous problems, together with the restricted Boltzmann machine
//! tooling used to benchmark it against contrastive divergence.
//!
//! The optimizer keeps `O(lambda * n)` state for `n` optimization variables:
//! a diagonal Gaussian model of the selected population plus two smoothed
//! descent directions (the elite improvement path and a rank-one anisotropic
//! direction extracted by a power method on best-minus-worse differences).
//! No `n x n` structure is ever allocated.

pub mod dataio;
pub mod directions;
pub mod objectives;
pub mod optimizer;
pub mod rbm;

pub use directions::DirectionState;
pub use objectives::Objective;
pub use optimizer::{
    run, InitMode, OptimizerConfig, OptimizerError, RunResult, StopReason,
};
