//! Small neural-network toolkit: GRU, 1-D convolution, dense layers, pooling,
//! dropout, weighted cross-entropy and Adam, all in `f64` with hand-derived
//! gradients.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod loss;
pub mod network;
pub mod params;
pub mod tensor;

use thiserror::Error;

pub use adam::Adam;
pub use network::{sigmoid, LayerConfig, Mode, Network, NetworkConfig, Tape};
pub use params::{ParamSet, ParamSlot};
pub use tensor::Tensor;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("kernel of {kernel} steps does not fit an input of {steps} steps")]
    KernelLargerThanInput { kernel: usize, steps: usize },
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("backward called without a matching forward pass")]
    NoForwardPass,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
