//! Dense `f64` tensors with a reverse-mode autodiff tape.
//!
//! The tape is the only way gradients are produced: build a [`Tape`], record
//! ops on [`Var`] handles, then call [`Tape::backward`] on a scalar.

mod adam;
pub mod categorical;
pub mod checkpoint;
mod error;
mod gradcheck;
mod store;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState, OptimError};
pub use error::{Result, TensorError};
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use store::{NamedTensor, ParamStore};
pub use tape::{BatchNormMode, BatchStats, Gradients, Tape, Var};
pub use tensor::{matmul, transpose, Tensor};

/// Running batch-norm statistics, `running = momentum * running + (1 - momentum) * batch`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub momentum: f64,
}

impl RunningStats {
    pub fn new(width: usize, momentum: f64) -> Self {
        Self {
            mean: vec![0.0; width],
            var: vec![1.0; width],
            momentum,
        }
    }

    pub fn update(&mut self, batch: &BatchStats) {
        let m = self.momentum;
        for (r, b) in self.mean.iter_mut().zip(&batch.mean) {
            *r = m * *r + (1.0 - m) * b;
        }
        for (r, b) in self.var.iter_mut().zip(&batch.var) {
            *r = m * *r + (1.0 - m) * b;
        }
    }
}
