use rand::Rng;

use super::{glorot_uniform, relu, relu_backward, Activation, LayerGrads};
use crate::error::{Error, Result};
use crate::tensor::ops::col2im;
use crate::tensor::{im2col, matmul, transpose, Scalar, Tensor};

/// Spatial kernel extent. Stride is 1 and padding is `valid`.
pub const KERNEL: usize = 3;

struct ConvCache<T: Scalar> {
    input: Tensor<T>,
    pre_activation: Tensor<T>,
}

/// 3×3 valid convolution lowered to im2col + matmul.
pub struct Conv2D<T: Scalar> {
    weights: Tensor<T>,
    bias: Tensor<T>,
    activation: Activation,
    cache: Option<ConvCache<T>>,
}

impl<T: Scalar> Conv2D<T> {
    /// Zero-initialized layer.
    pub fn new(in_channels: usize, out_channels: usize, activation: Activation) -> Result<Self> {
        Ok(Conv2D {
            weights: Tensor::zeros(&[KERNEL, KERNEL, in_channels, out_channels])?,
            bias: Tensor::zeros(&[out_channels])?,
            activation,
            cache: None,
        })
    }

    pub fn from_params(weights: Tensor<T>, bias: Tensor<T>, activation: Activation) -> Result<Self> {
        match *weights.shape() {
            [KERNEL, KERNEL, _, cout] if bias.shape() == [cout] => Ok(Conv2D {
                weights,
                bias,
                activation,
                cache: None,
            }),
            _ => Err(Error::dim(format!(
                "conv weights {:?} / bias {:?} are not [3, 3, Cin, Cout] / [Cout]",
                weights.shape(),
                bias.shape()
            ))),
        }
    }

    pub fn init_glorot<R: Rng>(&mut self, rng: &mut R) {
        let fan_in = KERNEL * KERNEL * self.in_channels();
        let fan_out = KERNEL * KERNEL * self.out_channels();
        glorot_uniform(rng, fan_in, fan_out, self.weights.data_mut());
        self.bias.fill(T::zero());
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[3]
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
        (KERNEL * KERNEL * self.in_channels() + 1) * self.out_channels()
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *input {
            [h, w, c] if h >= KERNEL && w >= KERNEL && c == self.in_channels() => {
                Ok(vec![h - KERNEL + 1, w - KERNEL + 1, self.out_channels()])
            }
            _ => Err(Error::dim(format!(
                "conv with {} input channels cannot take shape {input:?}",
                self.in_channels()
            ))),
        }
    }

    fn linear(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let out_shape = self.output_shape(x.shape())?;
        let cols = im2col(x, KERNEL)?;
        let kernel = self
            .weights
            .clone()
            .reshape(&[KERNEL * KERNEL * self.in_channels(), self.out_channels()])?;
        let mut z = matmul(&cols, &kernel)?;
        let bias = self.bias.data();
        for row in z.data_mut().chunks_exact_mut(bias.len()) {
            for (v, &b) in row.iter_mut().zip(bias) {
                *v = *v + b;
            }
        }
        z.reshape(&out_shape)
    }

    fn activate(&self, z: &Tensor<T>) -> Tensor<T> {
        match self.activation {
            Activation::Relu => relu(z),
            _ => z.clone(),
        }
    }

    /// Training forward; caches the input and pre-activation for [`Self::backward`].
    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let z = self.linear(x)?;
        let y = self.activate(&z);
        self.cache = Some(ConvCache {
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
            .ok_or_else(|| Error::State("conv backward called before forward".into()))?;
        dy.expect_shape(cache.pre_activation.shape())?;
        let dz = match self.activation {
            Activation::Relu => relu_backward(&cache.pre_activation, dy)?,
            _ => dy.clone(),
        };
        let (cin, cout) = (self.in_channels(), self.out_channels());
        let [h, w, _] = *cache.input.shape() else {
            unreachable!("cached conv input is rank 3")
        };
        let positions = dz.len() / cout;
        let dz = dz.reshape(&[positions, cout])?;

        let cols = im2col(&cache.input, KERNEL)?;
        let dw = matmul(&transpose(&cols)?, &dz)?.reshape(&[KERNEL, KERNEL, cin, cout])?;

        let mut db = vec![T::zero(); cout];
        for row in dz.data().chunks_exact(cout) {
            for (acc, &g) in db.iter_mut().zip(row) {
                *acc = *acc + g;
            }
        }

        let kernel = self.weights.clone().reshape(&[KERNEL * KERNEL * cin, cout])?;
        let dcols = matmul(&dz, &transpose(&kernel)?)?;
        let dx = col2im(&dcols, (h, w, cin), KERNEL)?;

        Ok(LayerGrads {
            dx,
            dw,
            db: Tensor::new(&[cout], db)?,
        })
    }

    pub(crate) fn clear_cache(&mut self) {
        self.cache = None;
    }

    /// Smallest absolute pre-activation from the last forward: distance to the ReLU kink.
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

    pub fn cast<U: Scalar>(&self) -> Conv2D<U> {
        Conv2D {
            weights: self.weights.cast(),
            bias: self.bias.cast(),
            activation: self.activation,
            cache: None,
        }
    }
}
