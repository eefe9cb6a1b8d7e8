//! Forward and backward passes for every layer type in the classifier stack.
//!
//! Parameterized layers cache what their backward pass needs during a
//! training-mode forward. `infer` variants take `&self` and cache nothing, so
//! a frozen model can be shared between readers.

mod activation;
mod conv;
mod dense;
mod dropout;
mod flatten;
mod loss;
mod pool;

pub use activation::{relu, relu_backward, Activation, Relu};
pub use conv::{Conv2D, KERNEL};
pub use dense::Dense;
pub use dropout::Dropout;
pub use flatten::Flatten;
pub use loss::{softmax, softmax_cross_entropy, LossOutput};
pub use pool::{MaxPool2D, POOL};

use crate::tensor::{Scalar, Tensor};

/// Whether a forward pass is part of training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Gradients of a parameterized layer.
#[derive(Debug, Clone)]
pub struct LayerGrads<T: Scalar> {
    /// Gradient with respect to the layer input.
    pub dx: Tensor<T>,
    pub dw: Tensor<T>,
    pub db: Tensor<T>,
}

fn glorot_uniform<T: Scalar, R: rand::Rng>(
    rng: &mut R,
    fan_in: usize,
    fan_out: usize,
    out: &mut [T],
) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in out {
        *v = T::from_f64(rng.random_range(-limit..limit));
    }
}
