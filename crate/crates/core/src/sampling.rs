//! Uniform sampling on the unit sphere and in the unit ball.

use crate::error::{Error, Result};
use crate::linalg::DenseVector;
use crate::rng::RngStream;
use crate::scalar::Real;

/// Uniform draw from `S^{d-1}` by normalizing a standard Gaussian vector.
pub fn sample_unit_sphere<T: Real>(rng: &mut RngStream, d: usize) -> Result<DenseVector<T>> {
    if d == 0 {
        return Err(Error::InvalidDimension("sphere dimension must be >= 1".into()));
    }
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-300 {
            return Ok(DenseVector::from_fn(d, |i| T::lit(g[i] / n)));
        }
    }
}

/// Uniform draw from `B^d`: a sphere sample scaled by `U^{1/d}`.
pub fn sample_unit_ball<T: Real>(rng: &mut RngStream, d: usize) -> Result<DenseVector<T>> {
    let u: DenseVector<f64> = sample_unit_sphere(rng, d)?;
    let r = rng.uniform().powf(1.0 / d as f64);
    Ok(DenseVector::from_fn(d, |i| T::lit(u[i] * r)))
}
