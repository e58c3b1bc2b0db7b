//! The LEA-MVD main loop: population lifecycle, rank-weighted statistics,
//! repopulation along the estimated descent directions, step-size
//! adaptation, restarts, and stopping.
//!
//! All state owned by the optimizer is linear in the number of variables:
//! the `lambda x n` population, the diagonal Gaussian model, and a handful
//! of length-`n` direction and bookkeeping vectors. Peak usage stays below
//! `40 * n` scalars for the default population size of 24.
//!
//! # Reproducibility
//!
//! A single ChaCha8 stream seeded from [`OptimizerConfig::rng_seed`] drives
//! every stochastic choice, consumed in a fixed order: the initial
//! population first, then per generation (a) the worst-index draw of the
//! anisotropic direction estimate and (b) per regenerated row, per
//! dimension, one standard-normal draw, one uniform perturbation test, and
//! a conditional perturbation factor. Two runs with the same configuration
//! and a deterministic objective produce bitwise-identical histories.

use ndarray::{Array1, Array2, s};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::directions::{self, DirectionState};
use crate::objectives::Objective;

/// Fractional-tournament exponent of the rank-weight distribution.
const ESD_EXPONENT: f64 = 1.5;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("seed vector has length {actual}, expected n_var = {expected}")]
    SeedLengthMismatch { expected: usize, actual: usize },
    #[error("non-finite fitness value {value} at population index {index}")]
    NonFiniteFitness { index: usize, value: f64 },
    #[error(
        "objective returned non-finite value {value} for individual {index} \
         in generation {generation}"
    )]
    NonFiniteObjective {
        generation: usize,
        index: usize,
        value: f64,
    },
}

/// How the initial population is drawn.
#[derive(Debug, Clone)]
pub enum InitMode {
    /// Every entry i.i.d. uniform on `[x_inf, x_sup]`.
    UniformBounds,
    /// Every entry i.i.d. `Normal(seed_j, sigma)`; one row is set to the
    /// seed itself so its fitness is never lost.
    GaussianAroundSeed { seed: Vec<f64>, sigma: f64 },
}

impl InitMode {
    /// Gaussian initialization around `seed` with the standard width 0.1.
    pub fn around_seed(seed: Vec<f64>) -> Self {
        InitMode::GaussianAroundSeed { seed, sigma: 0.1 }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    /// Population size.
    pub lambda: usize,
    /// Individuals carried over verbatim each generation.
    pub n_elite: usize,
    /// Number of optimization variables.
    pub n_var: usize,
    /// Lower search limit, broadcast to all variables.
    pub x_inf: f64,
    /// Upper search limit, broadcast to all variables.
    pub x_sup: f64,
    /// Generation budget.
    pub n_gen: usize,
    /// Convergence stop at `norm(sigma) <= sigma_min_scale * sqrt(n_var)`.
    pub sigma_min_scale: f64,
    /// Consecutive non-improving generations before a restart.
    pub stagnation_limit: usize,
    /// Per-entry probability of the multiplicative perturbation.
    pub perturb_prob: f64,
    /// Number of worse individuals sampled for the anisotropic direction.
    pub worst_sample_count: usize,
    /// Seed of the single RNG stream owned by the optimizer.
    pub rng_seed: u64,
    pub init_mode: InitMode,
    /// Clamp regenerated rows into `[x_inf, x_sup]` (off by default; bounds
    /// otherwise only shape initialization).
    pub clamp_to_bounds: bool,
    /// Re-evaluate elite rows every generation instead of caching their
    /// fitness. Only useful for stochastic objectives.
    pub reevaluate_elite: bool,
}

impl OptimizerConfig {
    /// Configuration with the standard parameter set: `lambda = 24`,
    /// `n_elite = 4`, uniform initialization inside the given bounds.
    pub fn new(n_var: usize, x_inf: f64, x_sup: f64, n_gen: usize) -> Self {
        OptimizerConfig {
            lambda: 24,
            n_elite: 4,
            n_var,
            x_inf,
            x_sup,
            n_gen,
            sigma_min_scale: 1e-4,
            stagnation_limit: 10,
            perturb_prob: 0.02,
            worst_sample_count: 4,
            rng_seed: 0,
            init_mode: InitMode::UniformBounds,
            clamp_to_bounds: false,
            reevaluate_elite: false,
        }
    }

    /// Convergence threshold on the norm of the model standard deviations.
    pub fn sigma_min(&self) -> f64 {
        self.sigma_min_scale * (self.n_var as f64).sqrt()
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        let fail = |msg: String| Err(OptimizerError::InvalidConfig(msg));
        if self.n_var == 0 {
            return fail("n_var must be positive".into());
        }
        if self.n_gen == 0 {
            return fail("n_gen must be positive".into());
        }
        if self.n_elite == 0 || self.n_elite >= self.lambda {
            return fail(format!(
                "need 1 <= n_elite < lambda, got n_elite = {}, lambda = {}",
                self.n_elite, self.lambda
            ));
        }
        if self.worst_sample_count == 0 || self.worst_sample_count > self.lambda - 1 {
            return fail(format!(
                "need 1 <= worst_sample_count <= lambda - 1, got {}",
                self.worst_sample_count
            ));
        }
        // Equal bounds are allowed as a degenerate initialization box.
        if !(self.x_inf <= self.x_sup) {
            return fail(format!(
                "need x_inf <= x_sup, got [{}, {}]",
                self.x_inf, self.x_sup
            ));
        }
        if !(self.sigma_min_scale > 0.0) {
            return fail("sigma_min_scale must be positive".into());
        }
        if self.stagnation_limit == 0 {
            return fail("stagnation_limit must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.perturb_prob) {
            return fail(format!(
                "perturb_prob must lie in [0, 1], got {}",
                self.perturb_prob
            ));
        }
        if let InitMode::GaussianAroundSeed { seed, sigma } = &self.init_mode {
            if seed.len() != self.n_var {
                return Err(OptimizerError::SeedLengthMismatch {
                    expected: self.n_var,
                    actual: seed.len(),
                });
            }
            if !(*sigma >= 0.0) {
                return fail("seed sigma must be non-negative".into());
            }
        }
        Ok(())
    }
}

/// Population matrix (one individual per row) plus its fitness values.
#[derive(Debug, Clone)]
pub struct Population {
    pub x: Array2<f64>,
    /// Objective values, `NaN` until evaluated.
    pub f: Vec<f64>,
    pub generation: usize,
}

impl Population {
    pub fn lambda(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_var(&self) -> usize {
        self.x.ncols()
    }

    /// Row `r` as a contiguous slice.
    pub fn row(&self, r: usize) -> &[f64] {
        self.x.row(r).to_slice().expect("population is row-major")
    }
}

/// Rank-based selection weights: rank 0 (best) gets the largest weight.
#[derive(Debug, Clone)]
pub struct EsdWeights {
    pub g: Vec<f64>,
}

/// Step-size state: `beta1` scales the total direction shift, `beta2`
/// balances the improvement path against the anisotropic direction, and
/// `count_felite` counts consecutive non-improving generations.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSizes {
    pub beta1: f64,
    pub beta2: f64,
    pub count_felite: usize,
}

impl Default for StepSizes {
    fn default() -> Self {
        StepSizes {
            beta1: 1.0,
            beta2: 0.9,
            count_felite: 0,
        }
    }
}

/// Diagonal Gaussian model of the selected population: per-variable
/// weighted mean and standard deviation.
#[derive(Debug, Clone)]
pub struct DiagonalModel {
    pub mu: Array1<f64>,
    pub sigma: Array1<f64>,
}

impl DiagonalModel {
    pub fn sigma_norm(&self) -> f64 {
        self.sigma.dot(&self.sigma).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GenerationBudget,
    SigmaConverged,
}

/// One history row per executed generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Best objective value observed so far (monotone under elitism).
    pub f_best: f64,
    /// Norm of the model standard deviations used to sample this generation.
    pub sigma_norm: f64,
    /// `beta1` in effect while sampling this generation.
    pub beta1: f64,
    /// `beta2` in effect while sampling this generation.
    pub beta2: f64,
    /// Whether a stagnation restart fired while preparing this generation.
    pub restarted: bool,
    /// Total objective evaluations after this generation.
    pub evals_cumulative: u64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub x_best: Array1<f64>,
    pub f_best: f64,
    pub generations_used: usize,
    pub stop_reason: StopReason,
    pub history: Vec<GenerationRecord>,
}

/// Draw the initial population.
///
/// Uniform mode fills every entry from `[x_inf, x_sup]`; seeded mode sets
/// row 0 to the seed itself (consuming no draws for it) and samples the
/// remaining rows entrywise from `Normal(seed_j, sigma)`.
pub fn initial_population(
    config: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Population, OptimizerError> {
    config.validate()?;
    let (lambda, n) = (config.lambda, config.n_var);
    let mut x = Array2::zeros((lambda, n));
    match &config.init_mode {
        InitMode::UniformBounds => {
            for entry in x.iter_mut() {
                *entry = if config.x_inf == config.x_sup {
                    config.x_inf
                } else {
                    rng.gen_range(config.x_inf..=config.x_sup)
                };
            }
        }
        InitMode::GaussianAroundSeed { seed, sigma } => {
            for (slot, &s) in x.row_mut(0).iter_mut().zip(seed.iter()) {
                *slot = s;
            }
            for mut row in x.slice_mut(s![1.., ..]).rows_mut() {
                for (slot, &s) in row.iter_mut().zip(seed.iter()) {
                    let z: f64 = rng.sample(StandardNormal);
                    *slot = s + sigma * z;
                }
            }
        }
    }
    Ok(Population {
        x,
        f: vec![f64::NAN; lambda],
        generation: 1,
    })
}

/// Rank the population best-first by objective value.
///
/// Returns the full permutation `ix` (stable: ties keep their original
/// order) and the first `n_elite` entries as `ibest`.
pub fn selection(
    f: &[f64],
    n_elite: usize,
) -> Result<(Vec<usize>, Vec<usize>), OptimizerError> {
    if n_elite > f.len() {
        return Err(OptimizerError::InvalidConfig(format!(
            "n_elite = {} exceeds population size {}",
            n_elite,
            f.len()
        )));
    }
    for (index, &value) in f.iter().enumerate() {
        if !value.is_finite() {
            return Err(OptimizerError::NonFiniteFitness { index, value });
        }
    }
    let mut ix: Vec<usize> = (0..f.len()).collect();
    ix.sort_by(|&a, &b| f[a].partial_cmp(&f[b]).expect("finite fitness"));
    let ibest = ix[..n_elite].to_vec();
    Ok((ix, ibest))
}

/// Fractional-tournament selection weights with exponent 1.5:
/// `G[k] = (lambda - k)^1.5 / sum_{j=1..lambda} j^1.5` for rank `k`.
///
/// Strictly decreasing in rank; sums to 1.
pub fn esd_weights(lambda: usize) -> Result<EsdWeights, OptimizerError> {
    if lambda == 0 {
        return Err(OptimizerError::InvalidConfig(
            "population size must be at least 1".into(),
        ));
    }
    let denom: f64 = (1..=lambda).map(|j| (j as f64).powf(ESD_EXPONENT)).sum();
    let g = (0..lambda)
        .map(|k| ((lambda - k) as f64).powf(ESD_EXPONENT) / denom)
        .collect();
    Ok(EsdWeights { g })
}

/// Weighted per-variable mean and standard deviation of the ranked
/// population: weight `G[k]` applies to individual `x[ix[k]]`.
///
/// Two sweeps over the matrix, `O(lambda * n)` time, `O(n)` extra memory.
pub fn weighted_mean_std(
    x: &Array2<f64>,
    ix: &[usize],
    weights: &EsdWeights,
) -> Result<DiagonalModel, OptimizerError> {
    let (lambda, n) = (x.nrows(), x.ncols());
    if ix.len() != lambda || weights.g.len() != lambda {
        return Err(OptimizerError::InvalidConfig(format!(
            "ranking ({}) and weights ({}) must both cover the population ({})",
            ix.len(),
            weights.g.len(),
            lambda
        )));
    }
    let mut mu = Array1::<f64>::zeros(n);
    for (k, &r) in ix.iter().enumerate() {
        let w = weights.g[k];
        let row = x.row(r);
        for (m, &v) in mu.iter_mut().zip(row.iter()) {
            *m += w * v;
        }
    }
    let mut var = Array1::<f64>::zeros(n);
    for (k, &r) in ix.iter().enumerate() {
        let w = weights.g[k];
        let row = x.row(r);
        for ((s, &v), &m) in var.iter_mut().zip(row.iter()).zip(mu.iter()) {
            let d = v - m;
            *s += w * d * d;
        }
    }
    let sigma = var.mapv(f64::sqrt);
    Ok(DiagonalModel { mu, sigma })
}

/// One step-size update.
///
/// On improvement the direction shift grows (`beta1` up to a cap of 3 once
/// above 1) and `beta2` leans toward the improvement path; on stagnation
/// both shrink and the stagnation counter advances.
pub fn adapt_step_sizes(steps: &StepSizes, improved: bool) -> StepSizes {
    if improved {
        StepSizes {
            count_felite: 0,
            beta2: (steps.beta2 + 0.2).min(1.0),
            beta1: if steps.beta1 > 1.0 {
                (1.1 * steps.beta1).min(3.0)
            } else {
                1.4 * steps.beta1
            },
        }
    } else {
        StepSizes {
            count_felite: steps.count_felite + 1,
            beta2: (steps.beta2 - 0.1).max(0.0),
            beta1: if steps.beta1 < 1.0 {
                0.8 * steps.beta1
            } else {
                0.5 * steps.beta1
            },
        }
    }
}

/// Reset the search scale after `stagnation_limit` non-improving
/// generations: standard deviations back to 1, `beta1` to 0.1, counter to
/// zero. `beta2` is left untouched. Returns whether the reset fired.
pub fn maybe_restart(
    steps: &mut StepSizes,
    model: &mut DiagonalModel,
    config: &OptimizerConfig,
) -> bool {
    if steps.count_felite != config.stagnation_limit {
        return false;
    }
    model.sigma.fill(1.0);
    steps.count_felite = 0;
    steps.beta1 = 0.1;
    true
}

/// Write one regenerated individual into `row`.
///
/// Per dimension: a zero-mean draw scaled by the model deviation, shifted
/// by the model mean and the blended direction
/// `v = beta2 * P + (1 - beta2) * mu_ani * C_ani` scaled by `beta1`, then
/// multiplied by `1 + U(-0.5, 0.5)` with probability `perturb_prob`.
fn generate_row(
    row: &mut [f64],
    model: &DiagonalModel,
    dir: &DirectionState,
    steps: &StepSizes,
    config: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) {
    let p = dir.p.as_slice().expect("contiguous");
    let c = dir.c_ani.as_slice().expect("contiguous");
    let mu = model.mu.as_slice().expect("contiguous");
    let sigma = model.sigma.as_slice().expect("contiguous");
    let dir_weight = 1.0 - steps.beta2;
    for i in 0..row.len() {
        let z: f64 = rng.sample(StandardNormal);
        let v = steps.beta2 * p[i] + dir_weight * dir.mu_ani * c[i];
        let mut value = z * sigma[i] + mu[i] + steps.beta1 * v;
        if rng.gen::<f64>() < config.perturb_prob {
            value *= 1.0 + rng.gen_range(-0.5..0.5);
        }
        if config.clamp_to_bounds {
            value = value.clamp(config.x_inf, config.x_sup);
        }
        row[i] = value;
    }
}

/// Build the next population: the elite rows verbatim, followed by
/// `lambda - n_elite` rows regenerated from the model and directions.
///
/// The returned population is unevaluated (`f` is `NaN`; elite fitness is
/// restored by the caller). [`run`] uses an in-place equivalent that never
/// holds two population matrices at once.
pub fn repopulate(
    model: &DiagonalModel,
    dir: &DirectionState,
    steps: &StepSizes,
    elite_rows: &Array2<f64>,
    config: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> Population {
    let n_elite = elite_rows.nrows();
    let (lambda, n) = (config.lambda, config.n_var);
    let mut x = Array2::zeros((lambda, n));
    x.slice_mut(s![..n_elite, ..]).assign(elite_rows);
    for mut row in x.slice_mut(s![n_elite.., ..]).rows_mut() {
        generate_row(
            row.as_slice_mut().expect("row-major"),
            model,
            dir,
            steps,
            config,
            rng,
        );
    }
    Population {
        x,
        f: vec![f64::NAN; lambda],
        generation: 0,
    }
}

fn swap_rows(x: &mut Array2<f64>, a: usize, b: usize) {
    if a == b {
        return;
    }
    let (mut ra, mut rb) = x.multi_slice_mut((s![a, ..], s![b, ..]));
    ndarray::Zip::from(&mut ra).and(&mut rb).for_each(std::mem::swap);
}

/// Move the elite rows to the top of the population in rank order,
/// restoring their cached fitness, without allocating a second matrix.
fn promote_elites(pop: &mut Population, ix: &[usize], n_elite: usize) {
    let lambda = pop.lambda();
    let elite_f: Vec<f64> = ix[..n_elite].iter().map(|&r| pop.f[r]).collect();
    // location[orig] = current physical row of original row `orig`.
    let mut location: Vec<usize> = (0..lambda).collect();
    let mut occupant: Vec<usize> = (0..lambda).collect();
    for (k, &orig) in ix[..n_elite].iter().enumerate() {
        let src = location[orig];
        if src != k {
            swap_rows(&mut pop.x, k, src);
            let displaced = occupant[k];
            occupant[src] = displaced;
            location[displaced] = src;
            occupant[k] = orig;
            location[orig] = k;
        }
    }
    pop.f[..n_elite].copy_from_slice(&elite_f);
}

/// Evaluate rows `from..lambda`, erroring on any non-finite result.
fn evaluate_rows<O: Objective + ?Sized>(
    pop: &mut Population,
    from: usize,
    objective: &O,
    generation: usize,
) -> Result<u64, OptimizerError> {
    let lambda = pop.lambda();
    let rows: Vec<&[f64]> = (from..lambda)
        .map(|r| pop.x.row(r).to_slice().expect("row-major"))
        .collect();
    objective.evaluate_batch(&rows, &mut pop.f[from..]);
    for (offset, &value) in pop.f[from..].iter().enumerate() {
        if !value.is_finite() {
            return Err(OptimizerError::NonFiniteObjective {
                generation,
                index: from + offset,
                value,
            });
        }
    }
    Ok((lambda - from) as u64)
}

/// Run the optimizer to completion.
///
/// The loop keeps generating populations until the generation budget is
/// reached or the norm of the model standard deviations falls to
/// `sigma_min`. Elite rows carry cached fitness; only regenerated rows are
/// evaluated unless [`OptimizerConfig::reevaluate_elite`] is set.
pub fn run<O: Objective + ?Sized>(
    config: &OptimizerConfig,
    objective: &O,
) -> Result<RunResult, OptimizerError> {
    config.validate()?;
    let n = config.n_var;
    let sigma_min = config.sigma_min();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let weights = esd_weights(config.lambda)?;

    let mut pop = initial_population(config, &mut rng)?;
    let mut evals = evaluate_rows(&mut pop, 0, objective, 1)?;
    let (mut ix, _) = selection(&pop.f, config.n_elite)?;

    let mut x_best: Array1<f64> = pop.x.row(ix[0]).to_owned();
    let mut x_best_prev = x_best.clone();
    let mut f_best = pop.f[ix[0]];
    let mut x_ever = x_best.clone();
    let mut f_ever = f_best;

    let mut steps = StepSizes::default();
    let mut dir = DirectionState::zeros(n);
    let mut model = DiagonalModel {
        mu: Array1::zeros(n),
        sigma: Array1::from_elem(n, sigma_min + 1.0),
    };

    let mut t = 1usize;
    let mut history = Vec::with_capacity(config.n_gen);
    history.push(GenerationRecord {
        generation: t,
        f_best: f_ever,
        sigma_norm: model.sigma_norm(),
        beta1: steps.beta1,
        beta2: steps.beta2,
        restarted: false,
        evals_cumulative: evals,
    });

    let stop_reason = loop {
        if t >= config.n_gen {
            break StopReason::GenerationBudget;
        }
        if model.sigma_norm() <= sigma_min {
            break StopReason::SigmaConverged;
        }

        model = weighted_mean_std(&pop.x, &ix, &weights)?;
        dir.p = directions::update_p(&dir.p, &x_best, &x_best_prev);
        let estimate = directions::estimate_anisotropic(
            &pop.x,
            &ix,
            &dir.p,
            &dir.c_ani,
            config.worst_sample_count,
            &mut rng,
        );
        dir.c_ani = estimate.c_ani;
        dir.mu_ani = estimate.mu_ani;
        dir.sigma_ani = estimate.sigma_ani;
        let restarted = maybe_restart(&mut steps, &mut model, config);
        let (beta1_used, beta2_used) = (steps.beta1, steps.beta2);
        let sigma_norm_used = model.sigma_norm();

        promote_elites(&mut pop, &ix, config.n_elite);
        for mut row in pop.x.slice_mut(s![config.n_elite.., ..]).rows_mut() {
            generate_row(
                row.as_slice_mut().expect("row-major"),
                &model,
                &dir,
                &steps,
                config,
                &mut rng,
            );
        }
        t += 1;
        pop.generation = t;

        let eval_from = if config.reevaluate_elite {
            0
        } else {
            config.n_elite
        };
        evals += evaluate_rows(&mut pop, eval_from, objective, t)?;
        ix = selection(&pop.f, config.n_elite)?.0;

        let f_now = pop.f[ix[0]];
        let improved = f_now < f_best;
        std::mem::swap(&mut x_best_prev, &mut x_best);
        x_best.assign(&pop.x.row(ix[0]));
        f_best = f_now;
        if f_now < f_ever {
            f_ever = f_now;
            x_ever.assign(&pop.x.row(ix[0]));
        }
        steps = adapt_step_sizes(&steps, improved);

        history.push(GenerationRecord {
            generation: t,
            f_best: f_ever,
            sigma_norm: sigma_norm_used,
            beta1: beta1_used,
            beta2: beta2_used,
            restarted,
            evals_cumulative: evals,
        });
    };

    Ok(RunResult {
        x_best: x_ever,
        f_best: f_ever,
        generations_used: t,
        stop_reason,
        history,
    })
}
