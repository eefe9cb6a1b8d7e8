//! Parameter update rules.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

fn check_pairs<T: Scalar>(params: &[&mut Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::dim(format!(
            "{} parameter tensors but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        g.expect_shape(p.shape())?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct SgdConfig {
    pub lr: f64,
}

impl SgdConfig {
    pub fn new(lr: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {lr}")));
        }
        Ok(SgdConfig { lr })
    }
}

/// `θ ← θ - lr·g`.
pub fn sgd_step<T: Scalar>(params: &mut [&mut Tensor<T>], grads: &[Tensor<T>], lr: f64) -> Result<()> {
    check_pairs(params, grads)?;
    let lr = T::from_f64(lr);
    for (p, g) in params.iter_mut().zip(grads) {
        for (theta, &grad) in p.data_mut().iter_mut().zip(g.data()) {
            *theta = *theta - lr * grad;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Added after the square root of the second moment.
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// Adam moments for a fixed list of parameter tensors.
#[derive(Debug, Clone)]
pub struct AdamState<T: Scalar> {
    pub config: AdamConfig,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    t: u64,
}

impl<T: Scalar> AdamState<T> {
    /// Zero moments shaped like `params`.
    pub fn new(config: AdamConfig, params: &[&Tensor<T>]) -> Result<Self> {
        if config.lr.is_nan()
            || config.lr < 0.0
            || !(0.0..1.0).contains(&config.beta1)
            || !(0.0..1.0).contains(&config.beta2)
            || config.epsilon.is_nan()
            || config.epsilon <= 0.0
        {
            return Err(Error::config(format!("invalid Adam hyperparameters {config:?}")));
        }
        let zeros = |p: &&Tensor<T>| Tensor::zeros(p.shape());
        Ok(AdamState {
            config,
            m: params.iter().map(zeros).collect::<Result<_>>()?,
            v: params.iter().map(zeros).collect::<Result<_>>()?,
            t: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Tensor<T>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor<T>] {
        &self.v
    }

    /// One bias-corrected Adam update.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        check_pairs(params, grads)?;
        if params.len() != self.m.len() {
            return Err(Error::dim(format!(
                "optimizer tracks {} tensors, got {}",
                self.m.len(),
                params.len()
            )));
        }
        for (p, m) in params.iter().zip(&self.m) {
            m.expect_shape(p.shape())?;
        }
        self.t += 1;
        let c = self.config;
        let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
        let (one, lr, eps) = (T::one(), T::from_f64(c.lr), T::from_f64(c.epsilon));
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let bc1 = one - b1.powi(t);
        let bc2 = one - b2.powi(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let slots = p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut().iter_mut().zip(v.data_mut()));
            for ((theta, &grad), (m, v)) in slots {
                *m = b1 * *m + (one - b1) * grad;
                *v = b2 * *v + (one - b2) * grad * grad;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *theta = *theta - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
