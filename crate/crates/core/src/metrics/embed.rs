use nalgebra::DMatrix;

use super::MetricError;
use crate::tensor::Tensor;

/// Maps a batch of images `[n, …]` to an `n × d` feature matrix.
pub trait Embedder: Sync {
    fn name(&self) -> &str;
    fn embed(&self, images: &Tensor<f64>) -> Result<DMatrix<f64>, MetricError>;
}

/// Flattens each sample.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityEmbedder;

impl Embedder for IdentityEmbedder {
    fn name(&self) -> &str {
        "identity"
    }

    fn embed(&self, images: &Tensor<f64>) -> Result<DMatrix<f64>, MetricError> {
        let n = images.shape()[0];
        Ok(DMatrix::from_row_slice(n, images.len() / n, images.data()))
    }
}

/// Box-averages `[n, c, h, w]` images to `c × 8 × 8` and flattens.
/// Images smaller than 8×8 are upsampled by pixel replication.
#[derive(Debug, Clone, Copy, Default)]
pub struct PixelEmbedder;

pub const PIXEL_GRID: usize = 8;

impl Embedder for PixelEmbedder {
    fn name(&self) -> &str {
        "pixel"
    }

    fn embed(&self, images: &Tensor<f64>) -> Result<DMatrix<f64>, MetricError> {
        let s = images.shape();
        if s.len() != 4 {
            return Err(MetricError::Input(format!("pixel embedder needs [n,c,h,w], got {s:?}")));
        }
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        let g = PIXEL_GRID;
        let fits = |e: usize| (e >= g && e.is_multiple_of(g)) || (e < g && g.is_multiple_of(e));
        if !fits(h) || !fits(w) {
            return Err(MetricError::Input(format!("{h}×{w} images cannot be pooled to {g}×{g}")));
        }
        let d = c * g * g;
        let mut out = DMatrix::zeros(n, d);
        for i in 0..n {
            for ch in 0..c {
                let plane = &images.data()[(i * c + ch) * h * w..][..h * w];
                for gy in 0..g {
                    for gx in 0..g {
                        let v = if h >= g {
                            let (bh, bw) = (h / g, w / g);
                            let mut acc = 0.0;
                            for y in gy * bh..(gy + 1) * bh {
                                for x in gx * bw..(gx + 1) * bw {
                                    acc += plane[y * w + x];
                                }
                            }
                            acc / (bh * bw) as f64
                        } else {
                            plane[(gy * h / g) * w + gx * w / g]
                        };
                        out[(i, (ch * g + gy) * g + gx)] = v;
                    }
                }
            }
        }
        Ok(out)
    }
}
