//! Dense feed-forward building blocks with explicit backward passes.
//!
//! Layers do not record a tape: each forward returns whatever its backward
//! needs, and the caller chains the backward calls in reverse order.

mod activation;
mod adam;
mod batchnorm;
mod dense;
mod gradcheck;

pub use activation::{
    leaky_relu, leaky_relu_backward, sigmoid, sigmoid_backward, tanh, tanh_backward,
    LEAKY_RELU_SLOPE,
};
pub use adam::{Adam, AdamConfig};
pub use batchnorm::{BatchNorm, BatchNormCache, BatchNormGrads, Mode};
pub use dense::{Dense, DenseGrads};
pub use gradcheck::{grad_check, GradCheckReport};

/// Batch-major matrix: rows are samples, columns are features.
pub type Tensor2 = ndarray::Array2<f64>;
