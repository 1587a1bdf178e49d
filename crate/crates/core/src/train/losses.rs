use crate::autodiff::{Tape, Var};
use crate::model::{Discriminator, ModelError};
use crate::tensor::{Element, Tensor, TensorError};

fn nonempty<T: Element>(v: &Var<'_, T>, what: &str) -> Result<(), TensorError> {
    if v.value().is_empty() {
        return Err(TensorError::Contract(format!("{what}: empty batch")));
    }
    Ok(())
}

/// `mean softplus(fake) + mean softplus(−real)`.
pub fn d_loss<'t, T: Element>(real: Var<'t, T>, fake: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
    nonempty(&real, "d_loss")?;
    if real.shape() != fake.shape() {
        return Err(crate::tensor::shape_err("d_loss", &real.shape(), &fake.shape()));
    }
    fake.softplus().mean()?.add(real.scale(-1.0).softplus().mean()?)
}

/// `mean softplus(−fake)`.
pub fn g_loss<'t, T: Element>(fake: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
    nonempty(&fake, "g_loss")?;
    fake.scale(-1.0).softplus().mean()
}

/// `(γ/2)·mean_i ‖∂ scores_i / ∂ x_i‖²` for per-sample `scores` computed from the leaf `x`.
/// The result stays differentiable with respect to everything `scores` depends on.
pub fn r1_from_scores<'t, T: Element>(
    tape: &'t Tape<T>,
    scores: Var<'t, T>,
    x: Var<'t, T>,
    gamma: f64,
) -> Result<Var<'t, T>, TensorError> {
    if !(gamma >= 0.0) {
        return Err(TensorError::Contract(format!("gamma must be ≥ 0, got {gamma}")));
    }
    let n = x.shape()[0];
    let g = tape.grad(scores.sum()?, &[x])?[0];
    if !g.value().all_finite() {
        return Err(TensorError::Contract("non-finite input gradient in R1".into()));
    }
    Ok(g.square()?.sum()?.scale(gamma / 2.0 / n as f64))
}

/// R1 penalty of `d` at `real` images.
pub fn r1_penalty<T: Element>(d: &Discriminator<T>, real: &Tensor<T>, gamma: f64) -> Result<f64, ModelError> {
    let tape = Tape::new();
    let p = d.params().bind(&tape);
    let x = tape.leaf(real.clone());
    let s = d.forward(&p, x)?;
    Ok(r1_from_scores(&tape, s, x, gamma)?.value().data()[0].as_f64())
}

fn eval(f: impl for<'t> Fn(&'t Tape<f64>) -> Result<Var<'t, f64>, TensorError>) -> Result<f64, TensorError> {
    let tape = Tape::new();
    Ok(f(&tape)?.value().data()[0])
}

fn leaf<'t>(tape: &'t Tape<f64>, v: &[f64]) -> Result<Var<'t, f64>, TensorError> {
    if v.is_empty() {
        return Err(TensorError::Contract("empty batch".into()));
    }
    Ok(tape.leaf(Tensor::new(&[v.len()], v.to_vec())?))
}

/// [`d_loss`] on plain score slices.
pub fn d_loss_value(real: &[f64], fake: &[f64]) -> Result<f64, TensorError> {
    eval(|t| d_loss(leaf(t, real)?, leaf(t, fake)?))
}

/// [`g_loss`] on a plain score slice.
pub fn g_loss_value(fake: &[f64]) -> Result<f64, TensorError> {
    eval(|t| g_loss(leaf(t, fake)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d_loss_reference_points() {
        let ln2 = 2f64.ln();
        assert!((d_loss_value(&[0.0], &[0.0]).unwrap() - 2.0 * ln2).abs() < 1e-12);
        assert!((d_loss_value(&[20.0], &[-20.0]).unwrap() - 2.0 * (-20f64).exp()).abs() < 1e-12);
        assert!((d_loss_value(&[-20.0], &[20.0]).unwrap() - 40.0).abs() < 1e-6);
    }

    #[test]
    fn g_loss_reference_points() {
        assert!((g_loss_value(&[0.0]).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!((g_loss_value(&[20.0]).unwrap() - 2.061e-9).abs() < 1e-11);
        assert!((g_loss_value(&[-20.0]).unwrap() - 20.0).abs() < 1e-6);
    }

    #[test]
    fn empty_or_mismatched_batches_are_errors() {
        assert!(d_loss_value(&[], &[]).is_err());
        assert!(g_loss_value(&[]).is_err());
        assert!(d_loss_value(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn r1_of_linear_critic() {
        let tape = Tape::<f64>::new();
        let a = Tensor::from_f64_slice(&[1, 3], &[1.0, -2.0, 0.5]).unwrap();
        let x = tape.leaf(Tensor::from_f64_slice(&[2, 3], &[0.3, 1.0, -4.0, 2.0, 2.0, 2.0]).unwrap());
        let s = x.mul(tape.leaf(a).broadcast_to(&[2, 3]).unwrap()).unwrap().sum_to(&[2, 1]).unwrap();
        let r1 = r1_from_scores(&tape, s, x, 3.0).unwrap();
        assert!((r1.value().data()[0] - 1.5 * 5.25).abs() < 1e-12);
        let s0 = x.scale(0.0).sum_to(&[2, 1]).unwrap();
        assert_eq!(r1_from_scores(&tape, s0, x, 3.0).unwrap().value().data()[0], 0.0);
    }
}
