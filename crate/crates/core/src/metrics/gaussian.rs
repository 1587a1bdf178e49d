use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::MetricError;

/// Eigenvalues in `[-EIG_CLIP·max(1, λmax), 0)` are clipped to zero; lower ones are an error.
pub const EIG_CLIP: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-9;
const NEGATIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub n: usize,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Column means and unbiased (n−1) covariance of an `n × d` feature matrix.
pub fn fit_gaussian(features: &DMatrix<f64>) -> Result<GaussianStats, MetricError> {
    let n = features.nrows();
    if n < 2 {
        return Err(MetricError::Input(format!("fit_gaussian needs n ≥ 2, got {n}")));
    }
    let d = features.ncols();
    let mean = DVector::from_iterator(d, features.column_iter().map(|c| c.iter().sum::<f64>() / n as f64));
    let mut centered = features.clone();
    for mut row in centered.row_iter_mut() {
        for (v, m) in row.iter_mut().zip(mean.iter()) {
            *v -= m;
        }
    }
    let mut cov = centered.transpose() * &centered / (n as f64 - 1.0);
    symmetrize(&mut cov);
    Ok(GaussianStats { mean, cov, n })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m = (&*m + t) * 0.5;
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<(), MetricError> {
    if !m.is_square() {
        return Err(MetricError::Input(format!("{}×{} matrix is not square", m.nrows(), m.ncols())));
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(MetricError::Numeric(format!("matrix asymmetry {asym:e} exceeds tolerance")));
    }
    Ok(())
}

/// Eigenvalues of symmetric `m` with tiny negatives clipped to zero.
fn clipped_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>, MetricError> {
    let mut eig = SymmetricEigen::new(m.clone());
    let top = eig.eigenvalues.iter().fold(0f64, |a, &v| a.max(v.abs()));
    let floor = -EIG_CLIP * top.max(1.0);
    for v in eig.eigenvalues.iter_mut() {
        if *v < 0.0 {
            if *v < floor {
                return Err(MetricError::Numeric(format!("matrix is not PSD (eigenvalue {v:e})")));
            }
            *v = 0.0;
        }
    }
    Ok(eig)
}

/// Symmetric PSD square root via eigendecomposition.
pub fn matrix_sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>, MetricError> {
    check_symmetric(m)?;
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let eig = clipped_eigen(&sym)?;
    let q = &eig.eigenvectors;
    let s = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let mut out = q * s * q.transpose();
    symmetrize(&mut out);
    Ok(out)
}

/// `‖μ₁−μ₂‖² + Tr(Σ₁ + Σ₂ − 2(Σ₁^{½} Σ₂ Σ₁^{½})^{½})`.
pub fn frechet_distance(g1: &GaussianStats, g2: &GaussianStats) -> Result<f64, MetricError> {
    if g1.dim() != g2.dim() || g1.cov.nrows() != g1.dim() || g2.cov.nrows() != g2.dim() {
        return Err(MetricError::Input(format!(
            "dimension mismatch: {} vs {}",
            g1.dim(),
            g2.dim()
        )));
    }
    if g1.mean == g2.mean && g1.cov == g2.cov {
        return Ok(0.0);
    }
    let mean_term = (&g1.mean - &g2.mean).norm_squared();
    let s1 = matrix_sqrt_psd(&g1.cov)?;
    let mut inner = &s1 * &g2.cov * &s1;
    symmetrize(&mut inner);
    let cross: f64 = clipped_eigen(&inner)?.eigenvalues.iter().map(|v| v.sqrt()).sum();
    let d = mean_term + g1.cov.trace() + g2.cov.trace() - 2.0 * cross;
    if d < -NEGATIVE_TOL {
        return Err(MetricError::Numeric(format!("Fréchet distance {d:e} is negative")));
    }
    Ok(d.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(mean: &[f64], cov: DMatrix<f64>) -> GaussianStats {
        GaussianStats {
            mean: DVector::from_row_slice(mean),
            cov,
            n: 10,
        }
    }

    #[test]
    fn two_point_covariance() {
        let f = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 2.0]);
        let g = fit_gaussian(&f).unwrap();
        assert_eq!(g.mean.as_slice(), &[1.0, 1.0]);
        assert_eq!(g.cov, DMatrix::from_element(2, 2, 2.0));
    }

    #[test]
    fn identical_rows_have_zero_covariance() {
        let f = DMatrix::from_row_slice(3, 2, &[1.5, -2.0, 1.5, -2.0, 1.5, -2.0]);
        let g = fit_gaussian(&f).unwrap();
        assert_eq!(g.cov, DMatrix::zeros(2, 2));
        assert_eq!(g.mean.as_slice(), &[1.5, -2.0]);
    }

    #[test]
    fn single_row_is_rejected() {
        assert!(fit_gaussian(&DMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn sqrt_of_diagonal() {
        let s = matrix_sqrt_psd(&DMatrix::from_diagonal(&DVector::from_row_slice(&[4.0, 9.0]))).unwrap();
        assert!((s - DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 3.0]))).amax() < 1e-12);
        let i = matrix_sqrt_psd(&DMatrix::identity(3, 3)).unwrap();
        assert!((i - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matrix_sqrt_psd(&m).is_err());
    }

    #[test]
    fn univariate_closed_form() {
        let a = stats(&[0.0], DMatrix::from_element(1, 1, 1.0));
        let b = stats(&[2.0], DMatrix::from_element(1, 1, 1.0));
        assert!((frechet_distance(&a, &b).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_scales() {
        let a = stats(&[0.0, 0.0], DMatrix::identity(2, 2));
        let b = stats(&[0.0, 0.0], DMatrix::identity(2, 2) * 4.0);
        assert!((frechet_distance(&a, &b).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(frechet_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = stats(&[0.0], DMatrix::identity(1, 1));
        let b = stats(&[0.0, 0.0], DMatrix::identity(2, 2));
        assert!(frechet_distance(&a, &b).is_err());
    }
}
