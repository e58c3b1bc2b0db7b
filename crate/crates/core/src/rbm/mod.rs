//! Restricted Boltzmann machine model, its reconstruction-error objective,
//! the CD-1 baseline trainer, and greedy layer-wise DBN stacking.

mod cd;
mod dbn;

pub use cd::{cd1_epochwise_train, CdConfig};
pub use dbn::{pretrain_dbn, DbnSpec, LayerOutcome, LayerTrainer, LeaMvdSettings};

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::objectives::Objective;
use crate::optimizer::OptimizerError;

/// Magic bytes of the RBM checkpoint format.
pub const CHECKPOINT_MAGIC: [u8; 4] = *b"RBM1";

#[derive(Debug, Error)]
pub enum RbmError {
    #[error("parameter vector has length {actual}, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("data has {actual} columns, expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("layer {layer}: visible size {visible} does not match previous hidden size {previous}")]
    ChainMismatch {
        layer: usize,
        visible: usize,
        previous: usize,
    },
    #[error("training diverged (non-finite parameter) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("bad checkpoint magic {actual:?}, expected {expected:?}")]
    BadCheckpointMagic { expected: [u8; 4], actual: [u8; 4] },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

/// One RBM: weight matrix `w` (visible x hidden), visible bias `b`,
/// hidden bias `c`.
#[derive(Debug, Clone)]
pub struct Rbm {
    pub n_visible: usize,
    pub n_hidden: usize,
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub c: Array1<f64>,
}

/// Borrowed RBM parameters over a flat slice, used to evaluate candidate
/// solutions without copying them into an owned model.
#[derive(Debug, Clone, Copy)]
pub struct RbmView<'a> {
    pub n_visible: usize,
    pub n_hidden: usize,
    pub w: ArrayView2<'a, f64>,
    pub b: ArrayView1<'a, f64>,
    pub c: ArrayView1<'a, f64>,
}

/// Number of trainable parameters of an RBM with the given layer sizes.
pub fn param_count(n_visible: usize, n_hidden: usize) -> usize {
    n_visible * n_hidden + n_visible + n_hidden
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Rbm {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Rbm {
            n_visible,
            n_hidden,
            w: Array2::zeros((n_visible, n_hidden)),
            b: Array1::zeros(n_visible),
            c: Array1::zeros(n_hidden),
        }
    }

    /// Standard training initialization: `Normal(0, 0.01)` weights, zero
    /// biases.
    pub fn init_random(n_visible: usize, n_hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut rbm = Rbm::zeros(n_visible, n_hidden);
        for w in rbm.w.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *w = 0.01 * z;
        }
        rbm
    }

    pub fn param_count(&self) -> usize {
        param_count(self.n_visible, self.n_hidden)
    }

    /// Flatten to `[w row-major, b, c]`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend(self.w.iter());
        out.extend(self.b.iter());
        out.extend(self.c.iter());
        out
    }

    /// Inverse of [`Rbm::flatten`].
    pub fn unflatten(params: &[f64], n_visible: usize, n_hidden: usize) -> Result<Self, RbmError> {
        let view = RbmView::from_flat(params, n_visible, n_hidden)?;
        Ok(Rbm {
            n_visible,
            n_hidden,
            w: view.w.to_owned(),
            b: view.b.to_owned(),
            c: view.c.to_owned(),
        })
    }

    pub fn view(&self) -> RbmView<'_> {
        RbmView {
            n_visible: self.n_visible,
            n_hidden: self.n_hidden,
            w: self.w.view(),
            b: self.b.view(),
            c: self.c.view(),
        }
    }

    /// Hidden unit probabilities `logistic(v . w + c)` for a batch of
    /// visible rows.
    pub fn hidden_activation(&self, v: &ArrayView2<f64>) -> Result<Array2<f64>, RbmError> {
        self.view().hidden_activation(v)
    }

    /// Mean-field reconstruction `logistic(h . w^T + b)` of a batch.
    pub fn reconstruct(&self, v: &ArrayView2<f64>) -> Result<Array2<f64>, RbmError> {
        self.view().reconstruct(v)
    }

    /// Summed squared reconstruction error over all entries of the batch.
    pub fn reconstruction_error(&self, v: &ArrayView2<f64>) -> Result<f64, RbmError> {
        self.view().reconstruction_error(v)
    }

    /// Serialize as `RBM1`, the layer sizes as little-endian `u32`, then
    /// the flattened parameters as little-endian `f64`.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<(), RbmError> {
        out.write_all(&CHECKPOINT_MAGIC)?;
        out.write_all(&(self.n_visible as u32).to_le_bytes())?;
        out.write_all(&(self.n_hidden as u32).to_le_bytes())?;
        for value in self.w.iter().chain(self.b.iter()).chain(self.c.iter()) {
            out.write_all(&value.to_le_bytes())?;
        }
        Ok(())
    }

    /// Inverse of [`Rbm::write_checkpoint`].
    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Self, RbmError> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(RbmError::BadCheckpointMagic {
                expected: CHECKPOINT_MAGIC,
                actual: magic,
            });
        }
        let mut word = [0u8; 4];
        input.read_exact(&mut word)?;
        let n_visible = u32::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let n_hidden = u32::from_le_bytes(word) as usize;
        let count = param_count(n_visible, n_hidden);
        let mut params = Vec::with_capacity(count);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            input.read_exact(&mut buf)?;
            params.push(f64::from_le_bytes(buf));
        }
        Rbm::unflatten(&params, n_visible, n_hidden)
    }
}

impl<'a> RbmView<'a> {
    /// Interpret a flat `[w row-major, b, c]` slice as RBM parameters.
    pub fn from_flat(
        params: &'a [f64],
        n_visible: usize,
        n_hidden: usize,
    ) -> Result<Self, RbmError> {
        let expected = param_count(n_visible, n_hidden);
        if params.len() != expected {
            return Err(RbmError::LengthMismatch {
                expected,
                actual: params.len(),
            });
        }
        let w_len = n_visible * n_hidden;
        let w = ArrayView2::from_shape((n_visible, n_hidden), &params[..w_len])
            .expect("shape checked");
        let b = ArrayView1::from(&params[w_len..w_len + n_visible]);
        let c = ArrayView1::from(&params[w_len + n_visible..]);
        Ok(RbmView {
            n_visible,
            n_hidden,
            w,
            b,
            c,
        })
    }

    fn check_width(&self, v: &ArrayView2<f64>) -> Result<(), RbmError> {
        if v.ncols() != self.n_visible {
            return Err(RbmError::DimensionMismatch {
                expected: self.n_visible,
                actual: v.ncols(),
            });
        }
        Ok(())
    }

    pub fn hidden_activation(&self, v: &ArrayView2<f64>) -> Result<Array2<f64>, RbmError> {
        self.check_width(v)?;
        let mut h = v.dot(&self.w);
        for mut row in h.rows_mut() {
            for (value, &bias) in row.iter_mut().zip(self.c.iter()) {
                *value = logistic(*value + bias);
            }
        }
        Ok(h)
    }

    pub fn reconstruct(&self, v: &ArrayView2<f64>) -> Result<Array2<f64>, RbmError> {
        let h = self.hidden_activation(v)?;
        let mut recon = h.dot(&self.w.t());
        for mut row in recon.rows_mut() {
            for (value, &bias) in row.iter_mut().zip(self.b.iter()) {
                *value = logistic(*value + bias);
            }
        }
        Ok(recon)
    }

    pub fn reconstruction_error(&self, v: &ArrayView2<f64>) -> Result<f64, RbmError> {
        let recon = self.reconstruct(v)?;
        let mut error = 0.0;
        for (&original, &rebuilt) in v.iter().zip(recon.iter()) {
            let d = original - rebuilt;
            error += d * d;
        }
        Ok(error)
    }
}

/// Reconstruction error of a flattened RBM on a fixed evaluation batch;
/// the objective wired into the optimizer (one individual = one RBM).
#[derive(Debug, Clone)]
pub struct RbmObjective {
    pub n_visible: usize,
    pub n_hidden: usize,
    data: Array2<f64>,
}

impl RbmObjective {
    pub fn new(n_visible: usize, n_hidden: usize, data: Array2<f64>) -> Result<Self, RbmError> {
        if data.ncols() != n_visible {
            return Err(RbmError::DimensionMismatch {
                expected: n_visible,
                actual: data.ncols(),
            });
        }
        Ok(RbmObjective {
            n_visible,
            n_hidden,
            data,
        })
    }

    pub fn n_var(&self) -> usize {
        param_count(self.n_visible, self.n_hidden)
    }
}

impl Objective for RbmObjective {
    fn evaluate(&self, x: &[f64]) -> f64 {
        let view = RbmView::from_flat(x, self.n_visible, self.n_hidden)
            .expect("candidate length matches the RBM layout");
        view.reconstruction_error(&self.data.view())
            .expect("evaluation batch matches the RBM layout")
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        /// flatten/unflatten round-trips bitwise for arbitrary layer sizes.
        #[test]
        fn flatten_round_trip(
            n_visible in 1usize..12,
            n_hidden in 1usize..12,
            seed in 0u64..500,
        ) {
            use rand::{Rng, SeedableRng};
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let count = param_count(n_visible, n_hidden);
            let params: Vec<f64> = (0..count).map(|_| r.gen_range(-2.0..2.0)).collect();
            let rbm = Rbm::unflatten(&params, n_visible, n_hidden).unwrap();
            prop_assert_eq!(rbm.flatten(), params);
        }
    }
}
