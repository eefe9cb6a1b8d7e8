//! Central-difference gradient checking.
//!
//! Parameters are exposed as a flat `f64` vector. The caller supplies a loss
//! closure (which also reports how close the evaluation sits to a ReLU kink
//! or pooling tie) and the analytic gradient.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

pub const DEFAULT_STEP: f64 = 1e-4;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
/// Points closer than this to a kink are excluded.
pub const KINK_TOLERANCE: f64 = 1e-6;

/// One loss evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub loss: f64,
    /// Distance to the nearest non-differentiable point; `INFINITY` if none.
    pub kink_margin: f64,
    /// Which side of each kink the evaluation landed on.
    pub kink_signature: u64,
}

impl Evaluation {
    pub fn smooth(loss: f64) -> Self {
        Evaluation {
            loss,
            kink_margin: f64::INFINITY,
            kink_signature: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub name: String,
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_err: f64,
    /// Coordinate attaining `max_rel_err`.
    pub worst_index: Option<usize>,
    pub tolerance: f64,
    pub pass: bool,
}

/// `|a - n| / max(|a|, |n|, 1e-12)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Compares `analytic[i]` with `(f(θ + h·eᵢ) - f(θ - h·eᵢ)) / 2h` for each
/// `i` in `indices`.
///
/// A coordinate is skipped when the unperturbed point lies within
/// [`KINK_TOLERANCE`] of a kink or when the perturbation crosses one (the
/// kink signature changes), since a finite difference there does not
/// estimate the one-sided derivative backward computes. A check with no
/// surviving coordinates fails.
pub fn grad_check<F>(
    name: &str,
    theta: &[f64],
    analytic: &[f64],
    indices: &[usize],
    step: f64,
    tolerance: f64,
    mut loss: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    assert_eq!(theta.len(), analytic.len(), "gradient length must match parameters");
    let base = loss(theta)?;
    let mut report = GradCheckReport {
        name: name.to_string(),
        checked: 0,
        skipped: 0,
        max_rel_err: 0.0,
        worst_index: None,
        tolerance,
        pass: false,
    };
    if base.kink_margin < KINK_TOLERANCE {
        report.skipped = indices.len();
        return Ok(report);
    }
    let mut probe = theta.to_vec();
    for &i in indices {
        probe[i] = theta[i] + step;
        let plus = loss(&probe)?;
        probe[i] = theta[i] - step;
        let minus = loss(&probe)?;
        probe[i] = theta[i];

        if plus.kink_signature != base.kink_signature || minus.kink_signature != base.kink_signature {
            report.skipped += 1;
            continue;
        }
        let numeric = (plus.loss - minus.loss) / (2.0 * step);
        let err = relative_error(analytic[i], numeric);
        report.checked += 1;
        // NaN compares false, so route it explicitly.
        if err.is_nan() || err > report.max_rel_err {
            report.max_rel_err = if err.is_nan() { f64::INFINITY } else { err };
            report.worst_index = Some(i);
        }
    }
    report.pass = report.checked > 0 && report.max_rel_err <= tolerance;
    Ok(report)
}

/// Picks up to `per_group` distinct indices from each range, seeded.
pub fn sample_indices(groups: &[Range<usize>], per_group: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for g in groups {
        let n = g.len();
        if n <= per_group {
            out.extend(g.clone());
        } else {
            let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, n, per_group)
                .into_iter()
                .map(|k| g.start + k)
                .collect();
            picked.sort_unstable();
            out.extend(picked);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(theta: &[f64]) -> Result<Evaluation> {
        Ok(Evaluation::smooth(theta.iter().map(|t| t * t * t).sum()))
    }

    #[test]
    fn accepts_correct_gradient() {
        let theta = [0.5, -1.0, 2.0];
        let grad: Vec<f64> = theta.iter().map(|t| 3.0 * t * t).collect();
        let r = grad_check("cubic", &theta, &grad, &[0, 1, 2], DEFAULT_STEP, DEFAULT_TOLERANCE, quadratic).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.checked, 3);
    }

    #[test]
    fn rejects_wrong_gradient() {
        let theta = [0.5, -1.0];
        let grad = [0.75, 6.0];
        let r = grad_check("cubic", &theta, &grad, &[0, 1], DEFAULT_STEP, DEFAULT_TOLERANCE, quadratic).unwrap();
        assert!(!r.pass);
        assert_eq!(r.worst_index, Some(1));
    }

    #[test]
    fn skips_kink_crossings() {
        // |x| at x = 5e-5 crosses the kink under a 1e-4 step.
        let eval = |t: &[f64]| {
            Ok(Evaluation {
                loss: t[0].abs(),
                kink_margin: t[0].abs(),
                kink_signature: u64::from(t[0] > 0.0),
            })
        };
        let r = grad_check("abs", &[5e-5], &[1.0], &[0], DEFAULT_STEP, DEFAULT_TOLERANCE, eval).unwrap();
        assert_eq!((r.checked, r.skipped), (0, 1));
        assert!(!r.pass);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_seeded_and_bounded() {
        let groups = [0..3, 3..1003];
        let a = sample_indices(&groups, 5, 1);
        assert_eq!(a.len(), 8);
        assert_eq!(&a[..3], &[0, 1, 2]);
        assert!(a[3..].iter().all(|i| (3..1003).contains(i)));
        assert_eq!(a, sample_indices(&groups, 5, 1));
    }
}
