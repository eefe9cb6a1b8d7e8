use rand::Rng;

use super::{glorot_uniform, relu, relu_backward, Activation, LayerGrads};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

struct DenseCache<T: Scalar> {
    input: Tensor<T>,
    pre_activation: Tensor<T>,
}

/// Fully connected layer, `y = act(xW + b)` with `W: [in, out]`.
pub struct Dense<T: Scalar> {
    weights: Tensor<T>,
    bias: Tensor<T>,
    activation: Activation,
    cache: Option<DenseCache<T>>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(inputs: usize, outputs: usize, activation: Activation) -> Result<Self> {
        Ok(Dense {
            weights: Tensor::zeros(&[inputs, outputs])?,
            bias: Tensor::zeros(&[outputs])?,
            activation,
            cache: None,
        })
    }

    pub fn from_params(weights: Tensor<T>, bias: Tensor<T>, activation: Activation) -> Result<Self> {
        match *weights.shape() {
            [_, out] if bias.shape() == [out] => Ok(Dense {
                weights,
                bias,
                activation,
                cache: None,
            }),
            _ => Err(Error::dim(format!(
                "dense weights {:?} / bias {:?} are not [in, out] / [out]",
                weights.shape(),
                bias.shape()
            ))),
        }
    }

    pub fn init_glorot<R: Rng>(&mut self, rng: &mut R) {
        glorot_uniform(rng, self.inputs(), self.outputs(), self.weights.data_mut());
        self.bias.fill(T::zero());
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Tensor<T> {
        &self.weights
    }

    pub fn bias(&self) -> &Tensor<T> {
        &self.bias
    }

    pub fn params_mut(&mut self) -> [&mut Tensor<T>; 2] {
        [&mut self.weights, &mut self.bias]
    }

    pub fn param_count(&self) -> usize {
        self.inputs() * self.outputs() + self.outputs()
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input != [self.inputs()] {
            return Err(Error::dim(format!(
                "dense layer expects input [{}], got {input:?}",
                self.inputs()
            )));
        }
        Ok(vec![self.outputs()])
    }

    fn linear(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.output_shape(x.shape())?;
        let n = self.outputs();
        let mut z = vec![T::zero(); n];
        for (&xi, w_row) in x.data().iter().zip(self.weights.data().chunks_exact(n)) {
            for (acc, &w) in z.iter_mut().zip(w_row) {
                *acc = *acc + xi * w;
            }
        }
        for (acc, &b) in z.iter_mut().zip(self.bias.data()) {
            *acc = *acc + b;
        }
        Tensor::new(&[n], z)
    }

    fn activate(&self, z: &Tensor<T>) -> Tensor<T> {
        match self.activation {
            Activation::Relu => relu(z),
            _ => z.clone(),
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let z = self.linear(x)?;
        let y = self.activate(&z);
        self.cache = Some(DenseCache {
            input: x.clone(),
            pre_activation: z,
        });
        Ok(y)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.activate(&self.linear(x)?))
    }

    pub fn backward(&self, dy: &Tensor<T>) -> Result<LayerGrads<T>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("dense backward called before forward".into()))?;
        dy.expect_shape(&[self.outputs()])?;
        let dz = match self.activation {
            Activation::Relu => relu_backward(&cache.pre_activation, dy)?,
            _ => dy.clone(),
        };
        let n = self.outputs();
        let mut dw = Vec::with_capacity(self.weights.len());
        let mut dx = Vec::with_capacity(self.inputs());
        for (&xi, w_row) in cache.input.data().iter().zip(self.weights.data().chunks_exact(n)) {
            dw.extend(dz.data().iter().map(|&g| xi * g));
            dx.push(
                w_row
                    .iter()
                    .zip(dz.data())
                    .fold(T::zero(), |acc, (&w, &g)| acc + w * g),
            );
        }
        Ok(LayerGrads {
            dx: Tensor::new(&[self.inputs()], dx)?,
            dw: Tensor::new(self.weights.shape(), dw)?,
            db: dz,
        })
    }

    pub(crate) fn clear_cache(&mut self) {
        self.cache = None;
    }

    pub(crate) fn kink_margin(&self) -> Option<f64> {
        if self.activation != Activation::Relu {
            return None;
        }
        let z = &self.cache.as_ref()?.pre_activation;
        Some(z.data().iter().map(|v| v.as_f64().abs()).fold(f64::INFINITY, f64::min))
    }

    pub(crate) fn hash_kink_pattern<H: std::hash::Hasher>(&self, state: &mut H) {
        if let (Activation::Relu, Some(cache)) = (self.activation, &self.cache) {
            for v in cache.pre_activation.data() {
                state.write_u8(u8::from(*v > T::zero()));
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> Dense<U> {
        Dense {
            weights: self.weights.cast(),
            bias: self.bias.cast(),
            activation: self.activation,
            cache: None,
        }
    }
}
