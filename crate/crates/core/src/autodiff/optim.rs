use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{Element, Tensor};

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("gradient shape {grad:?} does not match parameter {param:?}")]
    Shape { param: Vec<usize>, grad: Vec<usize> },
    #[error("non-finite gradient value at index {index}; step rejected")]
    NonFinite { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Element = f32> {
    pub m: Tensor<T>,
    pub v: Tensor<T>,
    pub t: u64,
}

impl<T: Element> AdamState<T> {
    pub fn new(shape: &[usize]) -> Self {
        AdamState {
            m: Tensor::zeros(shape),
            v: Tensor::zeros(shape),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update. On error neither `param` nor `state` is modified.
pub fn adam_step<T: Element>(
    param: &mut Tensor<T>,
    grad: &Tensor<T>,
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<(), OptimError> {
    if param.shape() != grad.shape() || state.m.shape() != param.shape() {
        return Err(OptimError::Shape {
            param: param.shape().to_vec(),
            grad: grad.shape().to_vec(),
        });
    }
    if let Some(index) = grad.data().iter().position(|g| !g.is_finite()) {
        return Err(OptimError::NonFinite { index });
    }
    state.t += 1;
    let t = state.t as i32;
    let b1 = T::lit(cfg.beta1);
    let b2 = T::lit(cfg.beta2);
    let one = T::one();
    let corr1 = T::lit(1.0 - cfg.beta1.powi(t));
    let corr2 = T::lit(1.0 - cfg.beta2.powi(t));
    let lr = T::lit(cfg.lr);
    let eps = T::lit(cfg.eps);
    let p = param.data_mut();
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    for i in 0..p.len() {
        let g = grad.data()[i];
        m[i] = b1 * m[i] + (one - b1) * g;
        v[i] = b2 * v[i] + (one - b2) * g * g;
        let mhat = m[i] / corr1;
        let vhat = v[i] / corr2;
        p[i] = p[i] - lr * mhat / (vhat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_param_unchanged() {
        let mut p = Tensor::<f64>::from_f64_slice(&[3], &[1.0, -2.0, 0.5]).unwrap();
        let before = p.clone();
        let mut st = AdamState::new(&[3]);
        adam_step(&mut p, &Tensor::zeros(&[3]), &mut st, &AdamConfig::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Tensor::<f64>::scalar(0.0);
        let mut st = AdamState::new(&[1]);
        adam_step(&mut p, &Tensor::scalar(1.0), &mut st, &AdamConfig::default()).unwrap();
        assert!((p.data()[0] + 0.001).abs() < 1e-10);
    }

    #[test]
    fn non_finite_gradient_rejected_without_mutation() {
        let mut p = Tensor::<f32>::scalar(1.0);
        let mut st = AdamState::new(&[1]);
        let err = adam_step(&mut p, &Tensor::scalar(f32::NAN), &mut st, &AdamConfig::default());
        assert_eq!(err, Err(OptimError::NonFinite { index: 0 }));
        assert_eq!(st.t, 0);
        assert_eq!(p.data()[0], 1.0);
    }

    #[test]
    fn identical_states_give_identical_results() {
        let run = || {
            let mut p = Tensor::<f32>::from_f64_slice(&[2], &[0.3, -0.7]).unwrap();
            let mut st = AdamState::new(&[2]);
            let g = Tensor::from_f64_slice(&[2], &[0.1, 2.0]).unwrap();
            for _ in 0..5 {
                adam_step(&mut p, &g, &mut st, &AdamConfig::default()).unwrap();
            }
            (p, st)
        };
        assert_eq!(run(), run());
    }
}
