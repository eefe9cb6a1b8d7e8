use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Reshapes an `[H, W, C]` activation into a vector.
#[derive(Default)]
pub struct Flatten {
    input_shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Flatten { input_shape: None }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(vec![input.iter().product()])
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.input_shape = Some(x.shape().to_vec());
        self.infer(x)
    }

    pub fn infer<T: Scalar>(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.clone().reshape(&[x.len()])
    }

    pub fn backward<T: Scalar>(&self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self
            .input_shape
            .as_ref()
            .ok_or_else(|| Error::State("flatten backward called before forward".into()))?;
        dy.clone().reshape(shape)
    }

    pub(crate) fn clear_cache(&mut self) {
        self.input_shape = None;
    }
}
