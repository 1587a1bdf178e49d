//! Central finite-difference verification of tape gradients (fp64).

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::tape::{Tape, Var};
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error)]
pub enum GradCheckError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("non-finite finite-difference estimate at coordinate {coord}")]
    NonFinite { coord: usize },
}

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub h: f64,
    /// Check at most this many coordinates, sampled with `seed`. `None` checks all.
    pub max_coords: Option<usize>,
    pub seed: u64,
    /// How many times `h` is divided by 10 when the stencil straddles a
    /// leaky-relu kink before the coordinate is skipped.
    pub kink_retries: usize,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            h: 1e-5,
            max_coords: None,
            seed: 0,
            kink_retries: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// max over coordinates of |analytic − numeric| / max(1, |analytic|)
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose stencil crossed a non-differentiable point at every tried step.
    pub skipped: usize,
}

/// Compares the tape gradient of `f` at `point` against central differences.
///
/// `f` receives a fresh tape and the point registered as a leaf, and must
/// return a scalar. Piecewise-linear activations are handled by comparing
/// kink signatures: a difference quotient is only used when both stencil
/// points lie in the same linear piece as `point`.
pub fn grad_check<F>(
    f: F,
    point: &Tensor<f64>,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, GradCheckError>
where
    F: for<'t> Fn(&'t Tape<f64>, Var<'t, f64>) -> Result<Var<'t, f64>, TensorError>,
{
    let eval = |p: &Tensor<f64>| -> Result<(f64, u64), GradCheckError> {
        let tape = Tape::new();
        let x = tape.leaf(p.clone());
        let y = f(&tape, x)?;
        let v = y.value();
        if v.len() != 1 {
            return Err(TensorError::Contract(format!("f must be scalar, got {:?}", v.shape())).into());
        }
        Ok((v.data()[0], tape.kink_signature()))
    };

    let tape = Tape::new();
    let x = tape.leaf(point.clone());
    let y = f(&tape, x)?;
    let sig0 = tape.kink_signature();
    let analytic = tape.grad(y, &[x])?[0].value();

    let coords: Vec<usize> = match opts.max_coords {
        Some(k) if k < point.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut v = sample(&mut rng, point.len(), k).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..point.len()).collect(),
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    for &c in &coords {
        let mut h = opts.h;
        let mut numeric = None;
        for _ in 0..=opts.kink_retries {
            let mut plus = point.clone();
            plus.data_mut()[c] += h;
            let mut minus = point.clone();
            minus.data_mut()[c] -= h;
            let (fp, sp) = eval(&plus)?;
            let (fm, sm) = eval(&minus)?;
            if sp == sig0 && sm == sig0 {
                numeric = Some((fp - fm) / (2.0 * h));
                break;
            }
            h /= 10.0;
        }
        let Some(num) = numeric else {
            report.skipped += 1;
            continue;
        };
        if !num.is_finite() {
            return Err(GradCheckError::NonFinite { coord: c });
        }
        let a = analytic.data()[c];
        let err = (a - num).abs() / a.abs().max(1.0);
        report.max_rel_error = report.max_rel_error.max(err);
        report.checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_is_exact() {
        let a = Tensor::from_f64_slice(&[3], &[0.5, -2.0, 3.0]).unwrap();
        let p = Tensor::from_f64_slice(&[3], &[1.0, 2.0, -1.0]).unwrap();
        let r = grad_check(
            |t, x| x.mul(t.leaf(a.clone()))?.sum(),
            &p,
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(r.max_rel_error < 1e-10, "{r:?}");
        assert_eq!(r.checked, 3);
    }

    #[test]
    fn constant_function_has_zero_error() {
        let p = Tensor::from_f64_slice(&[2], &[1.0, 2.0]).unwrap();
        let r = grad_check(
            |t, x| x.scale(0.0).sum()?.add(t.leaf(Tensor::scalar(4.0))),
            &p,
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert_eq!(r.max_rel_error, 0.0);
    }

    #[test]
    fn kink_crossing_is_skipped_not_reported() {
        // |x| at x = 1e-7: the central stencil with h = 1e-5 straddles 0.
        let p = Tensor::from_f64_slice(&[1], &[1e-9]).unwrap();
        let r = grad_check(
            |_, x| x.leaky_relu(0.0).sum(),
            &p,
            &GradCheckOptions {
                kink_retries: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.skipped, 1);
        assert_eq!(r.checked, 0);
    }
}
