use nalgebra::DMatrix;

use super::{fit_gaussian, frechet_distance, Embedder, ImageSource, MetricError};

const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct FidResult {
    pub value: f64,
    pub n: usize,
    pub embedder: String,
    /// True when the real side had fewer than `n` images and was resampled.
    pub real_with_replacement: bool,
}

fn embed_all(
    src: &dyn ImageSource,
    embedder: &dyn Embedder,
    n: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, bool), MetricError> {
    let mut rows: Vec<DMatrix<f64>> = Vec::new();
    let replaced = src.stream(n, seed, CHUNK, &mut |imgs| {
        rows.push(embedder.embed(&imgs)?);
        Ok(())
    })?;
    let d = rows.first().map_or(0, |r| r.ncols());
    let mut all = DMatrix::zeros(n, d);
    let mut at = 0;
    for r in rows {
        if r.ncols() != d {
            return Err(MetricError::Input("embedder changed its output dimension".into()));
        }
        all.rows_mut(at, r.nrows()).copy_from(&r);
        at += r.nrows();
    }
    if at != n {
        return Err(MetricError::Input(format!("source produced {at} of {n} samples")));
    }
    Ok((all, replaced))
}

/// Fréchet distance between Gaussians fitted to `n` embedded samples of each source.
pub fn fid(
    generated: &dyn ImageSource,
    real: &dyn ImageSource,
    embedder: &dyn Embedder,
    n: usize,
    seed: u64,
) -> Result<FidResult, MetricError> {
    if n < 2 {
        return Err(MetricError::Input(format!("fid needs n ≥ 2, got {n}")));
    }
    let (g, _) = embed_all(generated, embedder, n, seed)?;
    let (r, replaced) = embed_all(real, embedder, n, seed)?;
    let value = frechet_distance(&fit_gaussian(&g)?, &fit_gaussian(&r)?)?;
    Ok(FidResult {
        value,
        n,
        embedder: embedder.name().to_string(),
        real_with_replacement: replaced,
    })
}
