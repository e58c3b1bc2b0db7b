//! Greedy layer-wise pretraining of a stack of RBMs.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{cd1_epochwise_train, CdConfig, Rbm, RbmError, RbmObjective};
use crate::optimizer::{self, GenerationRecord, InitMode, OptimizerConfig};

/// Ordered layer sizes of a DBN; each layer's visible size must equal the
/// previous layer's hidden size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbnSpec {
    layers: Vec<(usize, usize)>,
}

impl DbnSpec {
    pub fn new(layers: Vec<(usize, usize)>) -> Result<Self, RbmError> {
        for (i, window) in layers.windows(2).enumerate() {
            let (_, prev_hidden) = window[0];
            let (visible, _) = window[1];
            if visible != prev_hidden {
                return Err(RbmError::ChainMismatch {
                    layer: i + 2,
                    visible,
                    previous: prev_hidden,
                });
            }
        }
        Ok(DbnSpec { layers })
    }

    /// Architecture used with 7x7 inputs: (49,30), (30,30), (30,120).
    pub fn small7x7() -> Self {
        DbnSpec {
            layers: vec![(49, 30), (30, 30), (30, 120)],
        }
    }

    /// Architecture used with 28x28 inputs: (784,500), (500,500), (500,2000).
    pub fn full28x28() -> Self {
        DbnSpec {
            layers: vec![(784, 500), (500, 500), (500, 2000)],
        }
    }

    pub fn layers(&self) -> &[(usize, usize)] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Trainable parameter count per layer.
    pub fn param_counts(&self) -> Vec<usize> {
        self.layers
            .iter()
            .map(|&(v, h)| super::param_count(v, h))
            .collect()
    }
}

/// Optimizer settings for one pretraining run; the variable count and
/// initialization mode are filled in per layer.
#[derive(Debug, Clone)]
pub struct LeaMvdSettings {
    pub lambda: usize,
    pub n_elite: usize,
    pub n_gen: usize,
    pub x_inf: f64,
    pub x_sup: f64,
    pub rng_seed: u64,
}

impl Default for LeaMvdSettings {
    fn default() -> Self {
        LeaMvdSettings {
            lambda: 24,
            n_elite: 4,
            n_gen: 50,
            x_inf: -0.1,
            x_sup: 0.1,
            rng_seed: 0,
        }
    }
}

impl LeaMvdSettings {
    fn to_config(&self, n_var: usize, init_mode: InitMode) -> OptimizerConfig {
        let mut config = OptimizerConfig::new(n_var, self.x_inf, self.x_sup, self.n_gen);
        config.lambda = self.lambda;
        config.n_elite = self.n_elite;
        config.rng_seed = self.rng_seed;
        config.init_mode = init_mode;
        config
    }
}

/// How each RBM of the stack is trained. Layer `k` (0-based) derives its
/// RNG seed as `rng_seed + k` from the configured base seed.
#[derive(Debug, Clone)]
pub enum LayerTrainer {
    Cd(CdConfig),
    LeaMvd(LeaMvdSettings),
    /// One CD epoch produces a seed solution; the optimizer then starts
    /// from a Gaussian cloud around it.
    LeaMvdSeededByCd { cd: CdConfig, opt: LeaMvdSettings },
}

/// Result of training one layer.
#[derive(Debug, Clone)]
pub struct LayerOutcome {
    pub rbm: Rbm,
    /// Reconstruction error on the evaluation rows, one value per
    /// iteration (CD epoch or optimizer generation).
    pub errors: Vec<f64>,
    /// Full optimizer history for LEA-MVD runs, `None` for CD.
    pub history: Option<Vec<GenerationRecord>>,
    /// Cumulative objective evaluations (LEA-MVD) or epochs (CD).
    pub evals: u64,
}

fn select_rows(data: &Array2<f64>, indices: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((indices.len(), data.ncols()));
    for (slot, &r) in indices.iter().enumerate() {
        out.row_mut(slot).assign(&data.row(r));
    }
    out
}

fn train_layer(
    n_visible: usize,
    n_hidden: usize,
    train: &Array2<f64>,
    eval_data: Array2<f64>,
    trainer: &LayerTrainer,
    layer_index: usize,
) -> Result<LayerOutcome, RbmError> {
    let layer_seed = |base: u64| base.wrapping_add(layer_index as u64);
    match trainer {
        LayerTrainer::Cd(cd) => {
            let config = CdConfig {
                rng_seed: layer_seed(cd.rng_seed),
                ..cd.clone()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
            let mut rbm = Rbm::init_random(n_visible, n_hidden, &mut rng);
            let errors = cd1_epochwise_train(
                &mut rbm,
                &train.view(),
                &eval_data.view(),
                &config,
                |_, _| {},
            )?;
            let evals = errors.len() as u64;
            Ok(LayerOutcome {
                rbm,
                errors,
                history: None,
                evals,
            })
        }
        LayerTrainer::LeaMvd(settings) => {
            let objective = RbmObjective::new(n_visible, n_hidden, eval_data)?;
            let mut settings = settings.clone();
            settings.rng_seed = layer_seed(settings.rng_seed);
            let config = settings.to_config(objective.n_var(), InitMode::UniformBounds);
            let result = optimizer::run(&config, &objective)?;
            finish_lea_layer(result, n_visible, n_hidden)
        }
        LayerTrainer::LeaMvdSeededByCd { cd, opt } => {
            let cd_config = CdConfig {
                epochs: 1,
                rng_seed: layer_seed(cd.rng_seed),
                ..cd.clone()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cd_config.rng_seed);
            let mut seed_rbm = Rbm::init_random(n_visible, n_hidden, &mut rng);
            cd1_epochwise_train(
                &mut seed_rbm,
                &train.view(),
                &eval_data.view(),
                &cd_config,
                |_, _| {},
            )?;
            let objective = RbmObjective::new(n_visible, n_hidden, eval_data)?;
            let mut settings = opt.clone();
            settings.rng_seed = layer_seed(settings.rng_seed);
            let config = settings.to_config(
                objective.n_var(),
                InitMode::around_seed(seed_rbm.flatten()),
            );
            let result = optimizer::run(&config, &objective)?;
            finish_lea_layer(result, n_visible, n_hidden)
        }
    }
}

fn finish_lea_layer(
    result: optimizer::RunResult,
    n_visible: usize,
    n_hidden: usize,
) -> Result<LayerOutcome, RbmError> {
    let rbm = Rbm::unflatten(
        result.x_best.as_slice().expect("contiguous"),
        n_visible,
        n_hidden,
    )?;
    let errors = result.history.iter().map(|r| r.f_best).collect();
    let evals = result
        .history
        .last()
        .map(|r| r.evals_cumulative)
        .unwrap_or(0);
    Ok(LayerOutcome {
        rbm,
        errors,
        history: Some(result.history),
        evals,
    })
}

/// Pretrain the stack greedily: each layer trains on the previous layer's
/// hidden activations of the training data, and measures its errors on the
/// same rows selected by `eval_indices`.
///
/// `eval_indices` selects the evaluation subset from the (propagated)
/// training data; pass `0..m` to evaluate on everything.
pub fn pretrain_dbn(
    spec: &DbnSpec,
    train: &Array2<f64>,
    eval_indices: &[usize],
    trainer: &LayerTrainer,
) -> Result<Vec<LayerOutcome>, RbmError> {
    if let Some(&(first_visible, _)) = spec.layers().first() {
        if train.ncols() != first_visible {
            return Err(RbmError::DimensionMismatch {
                expected: first_visible,
                actual: train.ncols(),
            });
        }
    }
    let mut outcomes = Vec::with_capacity(spec.len());
    let mut layer_input = train.to_owned();
    for (k, &(n_visible, n_hidden)) in spec.layers().iter().enumerate() {
        let eval_data = select_rows(&layer_input, eval_indices);
        let outcome = train_layer(n_visible, n_hidden, &layer_input, eval_data, trainer, k)?;
        if k + 1 < spec.len() {
            layer_input = outcome.rbm.hidden_activation(&layer_input.view())?;
        }
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    #[test]
    fn preset_specs_have_the_published_counts() {
        assert_eq!(DbnSpec::small7x7().param_counts(), vec![1549, 960, 3750]);
        assert_eq!(
            DbnSpec::full28x28().param_counts(),
            vec![393_284, 251_000, 1_002_500]
        );
    }

    #[test]
    fn chain_mismatch_is_rejected() {
        let err = DbnSpec::new(vec![(49, 30), (31, 30)]).unwrap_err();
        assert!(matches!(
            err,
            RbmError::ChainMismatch {
                layer: 2,
                visible: 31,
                previous: 30
            }
        ));
    }

    fn binary_data(m: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((m, d), |_| f64::from(rng.gen::<f64>() < 0.4))
    }

    #[test]
    fn single_layer_stack_equals_direct_training() {
        let data = binary_data(40, 6, 2);
        let eval: Vec<usize> = (0..40).collect();
        let cd = CdConfig {
            epochs: 4,
            rng_seed: 9,
            minibatch_size: 10,
            ..CdConfig::default()
        };
        let spec = DbnSpec::new(vec![(6, 3)]).unwrap();
        let outcomes =
            pretrain_dbn(&spec, &data, &eval, &LayerTrainer::Cd(cd.clone())).unwrap();
        assert_eq!(outcomes.len(), 1);

        // Layer 0 derives seed + 0, so direct training with the same seed
        // must match bitwise.
        let mut rng = ChaCha8Rng::seed_from_u64(cd.rng_seed);
        let mut direct = Rbm::init_random(6, 3, &mut rng);
        let errors =
            cd1_epochwise_train(&mut direct, &data.view(), &data.view(), &cd, |_, _| {})
                .unwrap();
        assert_eq!(outcomes[0].errors, errors);
        assert_eq!(outcomes[0].rbm.flatten(), direct.flatten());
    }

    #[test]
    fn propagated_inputs_stay_in_the_open_unit_interval() {
        let data = binary_data(30, 8, 3);
        let eval: Vec<usize> = (0..30).collect();
        let spec = DbnSpec::new(vec![(8, 5), (5, 4)]).unwrap();
        let trainer = LayerTrainer::Cd(CdConfig {
            epochs: 2,
            minibatch_size: 10,
            rng_seed: 4,
            ..CdConfig::default()
        });
        let outcomes = pretrain_dbn(&spec, &data, &eval, &trainer).unwrap();
        let propagated = outcomes[0].rbm.hidden_activation(&data.view()).unwrap();
        assert!(propagated.iter().all(|&p| p > 0.0 && p < 1.0));
        assert_eq!(outcomes[1].rbm.n_visible, 5);
    }

    #[test]
    fn lea_trainer_records_history_and_improves_on_seed() {
        let data = binary_data(25, 5, 8);
        let eval: Vec<usize> = (0..25).collect();
        let spec = DbnSpec::new(vec![(5, 3)]).unwrap();
        let settings = LeaMvdSettings {
            n_gen: 12,
            rng_seed: 6,
            ..LeaMvdSettings::default()
        };
        let trainer = LayerTrainer::LeaMvdSeededByCd {
            cd: CdConfig {
                minibatch_size: 25,
                rng_seed: 5,
                ..CdConfig::default()
            },
            opt: settings,
        };
        let outcomes = pretrain_dbn(&spec, &data, &eval, &trainer).unwrap();
        let outcome = &outcomes[0];
        assert_eq!(outcome.errors.len(), 12);
        assert!(outcome.history.is_some());
        for pair in outcome.errors.windows(2) {
            assert!(pair[1] <= pair[0], "optimizer error must be monotone");
        }
        let final_error = outcome
            .rbm
            .reconstruction_error(&data.view())
            .unwrap();
        assert_eq!(final_error, *outcome.errors.last().unwrap());
    }

    #[test]
    fn eval_subset_controls_the_objective() {
        let data = binary_data(30, 5, 8);
        let eval: Vec<usize> = (0..10).collect();
        let spec = DbnSpec::new(vec![(5, 3)]).unwrap();
        let settings = LeaMvdSettings {
            n_gen: 5,
            rng_seed: 6,
            ..LeaMvdSettings::default()
        };
        let outcomes =
            pretrain_dbn(&spec, &data, &eval, &LayerTrainer::LeaMvd(settings)).unwrap();
        let eval_matrix = select_rows(&data, &eval);
        let error = outcomes[0]
            .rbm
            .reconstruction_error(&eval_matrix.view())
            .unwrap();
        assert_eq!(error, *outcomes[0].errors.last().unwrap());
    }
}
