//! Tape-based reverse-mode differentiation, gradient checking and Adam.

pub mod gradcheck;
pub mod optim;
pub mod tape;

pub use gradcheck::{grad_check, GradCheckError, GradCheckOptions, GradCheckReport};
pub use optim::{adam_step, AdamConfig, AdamState, OptimError};
pub use tape::{Tape, Var};

use crate::tensor::{Element, Tensor, TensorError};

/// Gradient values of `loss` for each of `params`, in order.
pub fn backward<'t, T: Element>(
    tape: &'t Tape<T>,
    loss: Var<'t, T>,
    params: &[Var<'t, T>],
) -> Result<Vec<Tensor<T>>, TensorError> {
    Ok(tape
        .grad(loss, params)?
        .into_iter()
        .map(|g| (*g.value()).clone())
        .collect())
}
