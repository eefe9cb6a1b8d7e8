use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Result of the fused softmax + cross-entropy head.
#[derive(Debug, Clone)]
pub struct LossOutput<T: Scalar> {
    pub loss: T,
    pub probabilities: Tensor<T>,
    /// `probabilities - onehot(true_class)`.
    pub dlogits: Tensor<T>,
}

fn check_logits<T: Scalar>(logits: &Tensor<T>) -> Result<()> {
    if logits.rank() != 1 || logits.len() < 2 {
        return Err(Error::dim(format!(
            "logits must be a vector of at least 2 classes, got {:?}",
            logits.shape()
        )));
    }
    if !logits.is_finite() {
        return Err(Error::Numeric(format!("non-finite logits: {logits:?}")));
    }
    Ok(())
}

/// Max-shifted softmax. Returns the probabilities and `log Σ exp(z - max)`.
fn shifted_softmax<T: Scalar>(logits: &Tensor<T>) -> Result<(Tensor<T>, T, T)> {
    let max = logits.data().iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.data().iter().map(|&z| (z - max).exp()).collect();
    let sum = exps.iter().fold(T::zero(), |acc, &e| acc + e);
    let probs = exps.into_iter().map(|e| e / sum).collect();
    Ok((Tensor::new(logits.shape(), probs)?, max, sum.ln()))
}

pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    check_logits(logits)?;
    Ok(shifted_softmax(logits)?.0)
}

pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, true_class: usize) -> Result<LossOutput<T>> {
    check_logits(logits)?;
    if true_class >= logits.len() {
        return Err(Error::Index(format!(
            "class {true_class} out of range for {} logits",
            logits.len()
        )));
    }
    let (probabilities, max, log_sum) = shifted_softmax(logits)?;
    // -log p[k] = log Σ exp(z - max) - (z[k] - max)
    let loss = log_sum - (logits.data()[true_class] - max);
    let mut dlogits = probabilities.clone();
    let d = &mut dlogits.data_mut()[true_class];
    *d = *d - T::one();
    Ok(LossOutput {
        loss,
        probabilities,
        dlogits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(d: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(d.to_vec()).unwrap()
    }

    #[test]
    fn uniform_logits() {
        let out = softmax_cross_entropy(&v(&[0.; 4]), 0).unwrap();
        assert!(out.probabilities.data().iter().all(|&p| (p - 0.25).abs() < 1e-15));
        assert!((out.loss - 4f64.ln()).abs() < 1e-15);
        assert_eq!(out.dlogits.data(), &[-0.75, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn confident_logits() {
        // -log(e^10 / (e^10 + 3)) = ln(1 + 3e^-10), evaluated independently.
        let expected = (3.0 * (-10f64).exp()).ln_1p();
        let out = softmax_cross_entropy(&v(&[10., 0., 0., 0.]), 0).unwrap();
        assert!((out.loss - expected).abs() < 1e-15);
        assert!((out.loss - 1.3619e-4).abs() < 1e-8);
    }

    #[test]
    fn huge_logits_stay_finite() {
        let out = softmax_cross_entropy(&v(&[1000., -1000., 0., 999.]), 1).unwrap();
        assert!(out.loss.is_finite() && out.dlogits.is_finite());
        assert!((out.loss - 2000.0 - (1.0 + (-1f64).exp()).ln()).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        assert!(matches!(softmax_cross_entropy(&v(&[0., 0.]), 2), Err(Error::Index(_))));
        assert!(matches!(softmax_cross_entropy(&v(&[0., f64::NAN]), 0), Err(Error::Numeric(_))));
        assert!(matches!(softmax_cross_entropy(&v(&[0.]), 0), Err(Error::Dimension(_))));
    }
}
