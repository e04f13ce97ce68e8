//! Dense double-precision matrices, a reverse-mode tape, and Adam.

mod adam;
mod sparse;
mod tape;
mod tensor;

pub use adam::{adam_step, Adam};
pub use sparse::CsrMatrix;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;


use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op}: non-finite value")]
    NonFinite { op: &'static str },
    #[error("{op}: empty input")]
    Empty { op: &'static str },
    #[error("index {index:?} out of bounds for shape {shape:?}")]
    IndexOutOfBounds {
        index: (usize, usize),
        shape: (usize, usize),
    },
    #[error("masked softmax row has no admissible entry")]
    EmptyMaskRow,
    #[error("loss must be 1x1, got {shape:?}")]
    NonScalarLoss { shape: (usize, usize) },
    #[error("tape already consumed by backward; record a new forward pass")]
    TapeConsumed,
}

/// A trainable tensor with its gradient and Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
    m: Tensor,
    v: Tensor,
    step: u64,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let (r, c) = value.shape();
        Self {
            value,
            grad: Tensor::zeros(r, c),
            m: Tensor::zeros(r, c),
            v: Tensor::zeros(r, c),
            step: 0,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(Tensor::zeros(rows, cols))
    }

    /// Glorot-uniform initialization.
    pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Self::new(Tensor::from_vec(rows, cols, data).expect("sized to rows*cols"))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Replaces the value, resetting gradient and optimizer state.
    pub fn reset_to(&mut self, value: Tensor) -> Result<(), NumError> {
        if value.shape() != self.shape() {
            return Err(NumError::ShapeMismatch {
                op: "reset_to",
                left: self.shape(),
                right: value.shape(),
            });
        }
        *self = Param::new(value);
        Ok(())
    }
}
