//! Dense linear algebra and the differentiable layers used by the
//! classifiers and the link-prediction encoder.
//!
//! Every layer caches what its backward pass needs during `forward` and
//! accumulates parameter gradients in `backward`. Gradients are hand-derived
//! per layer; there is no general tape.

mod adam;
mod adjacency;
pub mod checkpoint;
mod layers;
mod loss;
mod matrix;

pub use adam::{adam_step, Adam};
pub use adjacency::{normalize_adjacency, NormalizedAdjacency};
pub(crate) use layers::relu_signature;
pub use layers::{
    gcn_layer_forward, mean_readout, mean_readout_backward, relu, relu_backward, sigmoid,
    sigmoid_backward, Activation, Conv1d, Dropout, GcnLayer, Linear, SortPooling,
};
pub use loss::{bce_loss, margin_loss, BceOutput, MarginOutput, PROBABILITY_CLAMP};
pub use matrix::Matrix;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A learnable matrix together with its gradient and Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub value: Matrix,
    pub grad: Matrix,
    first_moment: Matrix,
    second_moment: Matrix,
    step: u64,
}

impl Parameter {
    pub fn new(value: Matrix) -> Self {
        let (r, c) = value.shape();
        Parameter {
            value,
            grad: Matrix::zeros(r, c),
            first_moment: Matrix::zeros(r, c),
            second_moment: Matrix::zeros(r, c),
            step: 0,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(Matrix::zeros(rows, cols))
    }

    /// Glorot-uniform initialisation, `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot<R: Rng>(
        rows: usize,
        cols: usize,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self::new(Matrix::from_vec(rows, cols, data).expect("length matches shape"))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.len() == 0
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    /// Replaces the value, keeping optimizer state; shapes must agree.
    pub fn set_value(&mut self, value: Matrix) -> Result<()> {
        if value.shape() != self.value.shape() {
            return Err(Error::ShapeMismatch(format!(
                "parameter is {:?}, replacement is {:?}",
                self.value.shape(),
                value.shape()
            )));
        }
        self.value = value;
        Ok(())
    }

    pub(crate) fn accumulate(&mut self, grad: &Matrix) {
        debug_assert_eq!(grad.shape(), self.grad.shape());
        self.grad.add_assign(grad);
    }
}
