use super::MetricError;

const ANGLE_EPS: f64 = 1e-6;

/// `(1−t)·a + t·b`.
pub fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
}

/// Spherical interpolation on the angle between `a` and `b`; falls back to
/// [`lerp`] when the vectors are (anti)parallel to within 1e-6 rad.
pub fn slerp(a: &[f64], b: &[f64], t: f64) -> Result<Vec<f64>, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::Input(format!("slerp of {}- and {}-vectors", a.len(), b.len())));
    }
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(MetricError::Input("slerp of a zero vector".into()));
    }
    let cos = (a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)).clamp(-1.0, 1.0);
    let theta = cos.acos();
    if theta < ANGLE_EPS || std::f64::consts::PI - theta < ANGLE_EPS {
        return Ok(lerp(a, b, t));
    }
    let s = theta.sin();
    let ca = ((1.0 - t) * theta).sin() / s;
    let cb = (t * theta).sin() / s;
    Ok(a.iter().zip(b).map(|(x, y)| ca * x + cb * y).collect())
}
