use crate::tensor::{Element, Tensor};

use super::ModelError;

/// Pulls styles toward the mean style `w̄` for layers at or below `cutoff_resolution`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationConfig<T: Element = f32> {
    pub psi: f64,
    pub cutoff_resolution: usize,
    /// Mean style, shape `[d_w]`.
    pub mean_w: Tensor<T>,
}

impl<T: Element> TruncationConfig<T> {
    pub fn new(psi: f64, cutoff_resolution: usize, mean_w: Tensor<T>) -> Self {
        TruncationConfig {
            psi,
            cutoff_resolution,
            mean_w,
        }
    }
}

/// `w' = w̄ + ψ·(w − w̄)` on layers at resolution ≤ cutoff, `w' = w` elsewhere.
/// `w` is `[n, d]`; ψ = 1 returns `w` unchanged bit-for-bit.
pub fn truncate<T: Element>(
    w: &Tensor<T>,
    cfg: &TruncationConfig<T>,
    layer_resolution: usize,
) -> Result<Tensor<T>, ModelError> {
    let d = cfg.mean_w.len();
    if w.rank() != 2 || w.shape()[1] != d {
        return Err(ModelError::LatentDim {
            expected: d,
            got: *w.shape().last().unwrap_or(&0),
        });
    }
    if cfg.psi == 1.0 || layer_resolution > cfg.cutoff_resolution {
        return Ok(w.clone());
    }
    let psi = T::lit(cfg.psi);
    let mut out = w.clone();
    for row in out.data_mut().chunks_mut(d) {
        for (v, &m) in row.iter_mut().zip(cfg.mean_w.data()) {
            *v = m + psi * (*v - m);
        }
    }
    Ok(out)
}
