use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Mode;
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Inverted dropout: kept activations are scaled by `1 / (1 - rate)` during
/// training, so inference is the identity map.
pub struct Dropout {
    rate: f64,
    rng: ChaCha8Rng,
    mask: Option<(Vec<usize>, Vec<bool>)>,
}

impl Dropout {
    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::config(format!("dropout rate must be in [0, 1), got {rate}")));
        }
        Ok(Dropout {
            rate,
            rng: ChaCha8Rng::seed_from_u64(seed),
            mask: None,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Restarts the mask stream, so the next masks repeat those drawn after
    /// any earlier `reseed` with the same seed.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn keep_scale<T: Scalar>(&self) -> T {
        T::from_f64(1.0 / (1.0 - self.rate))
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        if mode == Mode::Infer {
            return Ok(x.clone());
        }
        let mask: Vec<bool> = if self.rate == 0.0 {
            vec![true; x.len()]
        } else {
            let keep = 1.0 - self.rate;
            (0..x.len()).map(|_| self.rng.random::<f64>() < keep).collect()
        };
        let y = apply_mask(x, &mask, self.keep_scale())?;
        self.mask = Some((x.shape().to_vec(), mask));
        Ok(y)
    }

    pub fn backward<T: Scalar>(&self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let (shape, mask) = self
            .mask
            .as_ref()
            .ok_or_else(|| Error::State("dropout backward called before a training forward".into()))?;
        dy.expect_shape(shape)?;
        apply_mask(dy, mask, self.keep_scale())
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_ref().map(|(_, m)| m.as_slice())
    }

    pub(crate) fn clear_cache(&mut self) {
        self.mask = None;
    }
}

fn apply_mask<T: Scalar>(x: &Tensor<T>, mask: &[bool], scale: T) -> Result<Tensor<T>> {
    let data = x
        .data()
        .iter()
        .zip(mask)
        .map(|(&v, &keep)| if keep { v * scale } else { T::zero() })
        .collect();
    Tensor::new(x.shape(), data)
}
