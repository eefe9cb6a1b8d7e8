use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Nonlinearity applied by a conv or dense layer.
///
/// `Softmax` marks the classifier head: the layer itself emits logits and
/// the softmax is applied by the fused loss (or by [`super::softmax`] at
/// prediction time).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
    Softmax,
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    // Written out so NaN propagates; `max` would swallow it.
    x.map(|v| if v < T::zero() { T::zero() } else { v })
}

/// Passes `dy` where `x > 0`; the gradient at exactly zero is zero.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
    dy.expect_shape(x.shape())?;
    let data = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(x.shape(), data)
}

/// Stand-alone ReLU with a cached input.
#[derive(Debug, Clone, Default)]
pub struct Relu<T: Scalar> {
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Relu<T> {
    pub fn new() -> Self {
        Relu { input: None }
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Tensor<T> {
        self.input = Some(x.clone());
        relu(x)
    }

    pub fn backward(&self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self
            .input
            .as_ref()
            .ok_or_else(|| Error::State("relu backward called before forward".into()))?;
        relu_backward(x, dy)
    }
}
