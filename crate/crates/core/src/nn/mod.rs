//! Minimal dense numerics: matrices, MLPs with ReLU, softmax cross-entropy,
//! hand-written reverse-mode gradients, Adam and exponential learning-rate
//! decay. Everything is `f64` so gradients can be checked against finite
//! differences.

mod checkpoint;
mod loss;
mod matrix;
mod mlp;
mod optim;

pub use checkpoint::{Checkpoint, Section, TensorShape, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use loss::softmax_cross_entropy;
pub use matrix::Matrix;
pub use mlp::{init_params, relu, relu_in_place, Linear, Mlp, MlpGrads, MlpTape};
pub use optim::{adam_step, AdamState, LrSchedule};

use crate::error::{Error, Result};

/// A model (or gradient buffer) whose trainable scalars can be flattened.
///
/// The flattening order is fixed per type so a gradient buffer built with
/// [`Parameterized::zeros_like`] lines up index-for-index with the model.
pub trait Parameterized: Sized {
    fn parameter_count(&self) -> usize;

    fn write_parameters(&self, out: &mut Vec<f64>);

    /// Reads parameters from the front of `src`, returning how many were used.
    fn read_parameters(&mut self, src: &[f64]) -> usize;

    fn zeros_like(&self) -> Self;

    fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        self.write_parameters(&mut out);
        out
    }

    fn set_parameters(&mut self, src: &[f64]) -> Result<()> {
        let n = self.parameter_count();
        if src.len() != n {
            return Err(Error::shape(format!(
                "expected {n} parameters, got {}",
                src.len()
            )));
        }
        self.read_parameters(src);
        Ok(())
    }

    /// `self += other`, elementwise over the flattened parameters.
    fn accumulate(&mut self, other: &Self) {
        let mut mine = self.parameters();
        for (a, b) in mine.iter_mut().zip(other.parameters()) {
            *a += b;
        }
        self.read_parameters(&mine);
    }
}
