use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Window extent and stride.
pub const POOL: usize = 2;

struct PoolCache {
    input_shape: Vec<usize>,
    /// Flat input index that won each output position.
    winners: Vec<usize>,
    margin: f64,
    /// Same, over windows whose maximum is nonzero.
    live_margin: f64,
}

/// 2×2 max pooling with stride 2; a trailing odd row or column is dropped.
#[derive(Default)]
pub struct MaxPool2D {
    cache: Option<PoolCache>,
}

impl MaxPool2D {
    pub fn new() -> Self {
        MaxPool2D { cache: None }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *input {
            [h, w, c] if h >= POOL && w >= POOL => Ok(vec![h / POOL, w / POOL, c]),
            _ => Err(Error::dim(format!(
                "max pooling needs an [H, W, C] input of at least {POOL}x{POOL}, got {input:?}"
            ))),
        }
    }

    fn pool<T: Scalar>(&self, x: &Tensor<T>) -> Result<(Tensor<T>, PoolCache)> {
        let out_shape = self.output_shape(x.shape())?;
        let [_, w, c] = *x.shape() else { unreachable!() };
        let [oh, ow, _] = out_shape[..] else { unreachable!() };
        let src = x.data();
        let mut out = Vec::with_capacity(oh * ow * c);
        let mut winners = Vec::with_capacity(oh * ow * c);
        let mut margin = f64::INFINITY;
        let mut live_margin = f64::INFINITY;
        for i in 0..oh {
            for j in 0..ow {
                for ch in 0..c {
                    let mut best = (i * POOL * w + j * POOL) * c + ch;
                    let mut runner_up = f64::NEG_INFINITY;
                    // Row-major window order; strict comparison keeps the first tie.
                    // A NaN wins its window so it reaches the loss.
                    for (u, v) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = ((i * POOL + u) * w + j * POOL + v) * c + ch;
                        if src[idx] > src[best] || src[idx].is_nan() {
                            runner_up = runner_up.max(src[best].as_f64());
                            best = idx;
                        } else {
                            runner_up = runner_up.max(src[idx].as_f64());
                        }
                    }
                    let gap = src[best].as_f64() - runner_up;
                    margin = margin.min(gap);
                    if src[best] != T::zero() {
                        live_margin = live_margin.min(gap);
                    }
                    out.push(src[best]);
                    winners.push(best);
                }
            }
        }
        let cache = PoolCache {
            input_shape: x.shape().to_vec(),
            winners,
            margin,
            live_margin,
        };
        Ok((Tensor::new(&out_shape, out)?, cache))
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (y, cache) = self.pool(x)?;
        self.cache = Some(cache);
        Ok(y)
    }

    pub fn infer<T: Scalar>(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.pool(x)?.0)
    }

    /// Routes each upstream gradient to the position that won its window.
    pub fn backward<T: Scalar>(&self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("max pool backward called before forward".into()))?;
        dy.expect_shape(&self.output_shape(&cache.input_shape)?)?;
        let mut dx = Tensor::zeros(&cache.input_shape)?;
        let buf = dx.data_mut();
        for (&idx, &g) in cache.winners.iter().zip(dy.data()) {
            buf[idx] = buf[idx] + g;
        }
        Ok(dx)
    }

    pub(crate) fn clear_cache(&mut self) {
        self.cache = None;
    }

    pub(crate) fn hash_kink_pattern<H: std::hash::Hasher>(&self, state: &mut H) {
        if let Some(cache) = &self.cache {
            for &w in &cache.winners {
                state.write_usize(w);
            }
        }
    }

    /// Smallest gap between a window's maximum and its runner-up.
    pub(crate) fn kink_margin(&self) -> Option<f64> {
        self.cache.as_ref().map(|c| c.margin)
    }

    /// Like [`kink_margin`](Self::kink_margin) but ignoring windows whose
    /// maximum is exactly zero. Behind a ReLU such a window holds only dead
    /// units, which stay at zero while the ReLU margin holds.
    pub(crate) fn live_kink_margin(&self) -> Option<f64> {
        self.cache.as_ref().map(|c| c.live_margin)
    }
}
