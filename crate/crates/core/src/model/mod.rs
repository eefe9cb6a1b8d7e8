//! Layer composition, the architecture presets, parameter accounting,
//! checkpoints and finite-difference verification.

mod checkpoint;
pub mod gradcheck;
mod presets;
mod summary;
pub mod verify;

use std::hash::{DefaultHasher, Hasher};

use crate::error::{Error, Result};
use crate::layers::{Activation, Conv2D, Dense, Dropout, Flatten, MaxPool2D, Mode};
use crate::tensor::{Scalar, Tensor};

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub(crate) use checkpoint::write_atomic;
pub use presets::{build_model, Preset, DEFAULT_DROPOUT, NUM_CLASSES};
pub use summary::{LayerSummary, Summary};

/// One entry of a [`Sequential`] stack.
pub enum Layer<T: Scalar> {
    Conv2D(Conv2D<T>),
    MaxPool2D(MaxPool2D),
    Dropout(Dropout),
    Flatten(Flatten),
    Dense(Dense<T>),
}

impl<T: Scalar> Layer<T> {
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::Conv2D(l) => l.output_shape(input),
            Layer::MaxPool2D(l) => l.output_shape(input),
            Layer::Dropout(_) => Ok(input.to_vec()),
            Layer::Flatten(l) => l.output_shape(input),
            Layer::Dense(l) => l.output_shape(input),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv2D(l) => l.param_count(),
            Layer::Dense(l) => l.param_count(),
            _ => 0,
        }
    }

    fn clear_cache(&mut self) {
        match self {
            Layer::Conv2D(l) => l.clear_cache(),
            Layer::MaxPool2D(l) => l.clear_cache(),
            Layer::Dropout(l) => l.clear_cache(),
            Layer::Flatten(l) => l.clear_cache(),
            Layer::Dense(l) => l.clear_cache(),
        }
    }
}

/// An ordered layer stack mapping an `[H, W, C]` image to class logits.
pub struct Sequential<T: Scalar = f32> {
    input_shape: Vec<usize>,
    layers: Vec<Layer<T>>,
    /// Set by a training-mode forward, cleared by an inference forward.
    primed: bool,
}

fn dropout_seed(seed: u64, layer: usize) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(layer as u64 + 1)
}

impl<T: Scalar> Sequential<T> {
    /// Validates that every layer accepts its predecessor's output.
    pub fn new(input_shape: &[usize], layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("a model needs at least one layer"));
        }
        let mut shape = input_shape.to_vec();
        for (i, layer) in layers.iter().enumerate() {
            shape = layer
                .output_shape(&shape)
                .map_err(|e| Error::dim(format!("layer {i} does not chain: {e}")))?;
        }
        if shape.len() != 1 {
            return Err(Error::dim(format!("model must end in a vector, got {shape:?}")));
        }
        Ok(Sequential {
            input_shape: input_shape.to_vec(),
            layers,
            primed: false,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn num_classes(&self) -> usize {
        self.shapes().last().map_or(0, |s| s[0])
    }

    /// Output shape of every layer, in order.
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        let mut shape = self.input_shape.clone();
        self.layers
            .iter()
            .map(|l| {
                shape = l.output_shape(&shape).expect("validated at construction");
                shape.clone()
            })
            .collect()
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Mutable access to layers. Parameter tensors keep their shapes, so the
    /// chain validated at construction stays intact.
    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    /// Parameter tensors in declaration order (weights then bias per layer).
    pub fn params(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv2D(l) => out.extend([l.weights(), l.bias()]),
                Layer::Dense(l) => out.extend([l.weights(), l.bias()]),
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv2D(l) => out.extend(l.params_mut()),
                Layer::Dense(l) => out.extend(l.params_mut()),
                _ => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn summary(&self) -> Summary {
        summary::summarize(self)
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(Error::dim(format!(
                "model expects input {:?}, got {:?}",
                self.input_shape,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Runs every layer in order and returns the logits.
    ///
    /// `Mode::Train` samples dropout masks and caches what [`Self::backward`]
    /// needs. `Mode::Infer` is deterministic and clears those caches.
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.check_input(x)?;
        if mode == Mode::Infer {
            self.layers.iter_mut().for_each(Layer::clear_cache);
            self.primed = false;
            return self.infer(x);
        }
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = match layer {
                Layer::Conv2D(l) => l.forward(&h)?,
                Layer::MaxPool2D(l) => l.forward(&h)?,
                Layer::Dropout(l) => l.forward(&h, Mode::Train)?,
                Layer::Flatten(l) => l.forward(&h)?,
                Layer::Dense(l) => l.forward(&h)?,
            };
        }
        self.primed = true;
        Ok(h)
    }

    /// Inference forward that leaves the model untouched.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            h = match layer {
                Layer::Conv2D(l) => l.infer(&h)?,
                Layer::MaxPool2D(l) => l.infer(&h)?,
                Layer::Dropout(_) => h,
                Layer::Flatten(l) => l.infer(&h)?,
                Layer::Dense(l) => l.infer(&h)?,
            };
        }
        Ok(h)
    }

    /// Gradients for every parameter tensor, in [`Self::params`] order.
    pub fn backward(&mut self, dlogits: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        Ok(self.backward_full(dlogits)?.0)
    }

    /// Like [`Self::backward`] but also returns the gradient of the input.
    pub fn backward_full(&mut self, dlogits: &Tensor<T>) -> Result<(Vec<Tensor<T>>, Tensor<T>)> {
        if !self.primed {
            return Err(Error::State(
                "backward requires a preceding training-mode forward".into(),
            ));
        }
        let mut grads = Vec::new();
        let mut g = dlogits.clone();
        for layer in self.layers.iter().rev() {
            g = match layer {
                Layer::Conv2D(l) => {
                    let lg = l.backward(&g)?;
                    grads.push(lg.db);
                    grads.push(lg.dw);
                    lg.dx
                }
                Layer::Dense(l) => {
                    let lg = l.backward(&g)?;
                    grads.push(lg.db);
                    grads.push(lg.dw);
                    lg.dx
                }
                Layer::MaxPool2D(l) => l.backward(&g)?,
                Layer::Dropout(l) => l.backward(&g)?,
                Layer::Flatten(l) => l.backward(&g)?,
            };
        }
        grads.reverse();
        Ok((grads, g))
    }

    /// Resets every dropout layer's mask stream from `seed`.
    pub fn reseed_dropout(&mut self, seed: u64) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            if let Layer::Dropout(d) = layer {
                d.reseed(dropout_seed(seed, i));
            }
        }
    }

    /// Replaces every dropout layer with one of the given rate.
    pub fn set_dropout_rate(&mut self, rate: f64, seed: u64) -> Result<()> {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            if let Layer::Dropout(d) = layer {
                *d = Dropout::new(rate, dropout_seed(seed, i))?;
            }
        }
        Ok(())
    }

    /// Distance of the last training forward from the nearest ReLU kink or
    /// pooling tie. `INFINITY` when the model has neither.
    ///
    /// A pool fed by a ReLU layer ignores all-zero windows: those inputs are
    /// dead units whose own margin is already counted.
    pub fn kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        let mut after_relu = false;
        for layer in &self.layers {
            let m = match layer {
                Layer::Conv2D(c) => c.kink_margin(),
                Layer::Dense(d) => d.kink_margin(),
                Layer::MaxPool2D(p) if after_relu => p.live_kink_margin(),
                Layer::MaxPool2D(p) => p.kink_margin(),
                _ => None,
            };
            after_relu = match layer {
                Layer::Conv2D(c) => c.activation() == Activation::Relu,
                Layer::Dense(d) => d.activation() == Activation::Relu,
                _ => false,
            };
            margin = margin.min(m.unwrap_or(f64::INFINITY));
        }
        margin
    }

    /// Fingerprint of which side of every kink the last training forward
    /// landed on.
    pub fn kink_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv2D(c) => c.hash_kink_pattern(&mut h),
                Layer::Dense(d) => d.hash_kink_pattern(&mut h),
                Layer::MaxPool2D(p) => p.hash_kink_pattern(&mut h),
                _ => {}
            }
        }
        h.finish()
    }

    /// Copies the parameters into another scalar type. Caches are dropped
    /// and dropout layers restart from `seed`.
    pub fn cast<U: Scalar>(&self, seed: u64) -> Result<Sequential<U>> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            layers.push(match layer {
                Layer::Conv2D(l) => Layer::Conv2D(l.cast()),
                Layer::Dense(l) => Layer::Dense(l.cast()),
                Layer::MaxPool2D(_) => Layer::MaxPool2D(MaxPool2D::new()),
                Layer::Flatten(_) => Layer::Flatten(Flatten::new()),
                Layer::Dropout(d) => Layer::Dropout(Dropout::new(d.rate(), dropout_seed(seed, i))?),
            });
        }
        Sequential::new(&self.input_shape, layers)
    }
}
