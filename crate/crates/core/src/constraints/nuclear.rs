use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng::RngStream;
use crate::sampling::sample_unit_sphere;
use crate::scalar::Real;

pub const NUCLEAR_TOL: f64 = 1e-8;
pub const NUCLEAR_MAX_ITER: usize = 1000;

#[derive(Clone, Debug)]
pub struct NuclearLmo<T> {
    /// `−radius·u₁v₁ᵀ`
    pub matrix: DenseMatrix<T>,
    /// Estimated top singular value of the input.
    pub sigma: T,
    /// Input was the zero matrix; the returned matrix is zero.
    pub degenerate: bool,
    pub converged: bool,
}

/// `argmin_{‖M‖_* ≤ radius} ⟨M, G⟩` via power iteration on `GᵀG`.
///
/// Iterates until successive Rayleigh quotients agree to `tol` (relative);
/// if that never happens within `max_iter`, restarts once from a fresh
/// random vector and keeps the better of the two runs.
pub fn nuclear_lmo<T: Real>(
    g: &DenseMatrix<T>,
    radius: T,
    tol: T,
    max_iter: usize,
    rng: &mut RngStream,
) -> Result<NuclearLmo<T>> {
    if !(radius.is_finite() && radius > T::zero()) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    if g.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("nuclear LMO input".into()));
    }
    let (rows, cols) = (g.rows(), g.cols());
    if g.is_zero() {
        return Ok(NuclearLmo {
            matrix: DenseMatrix::zeros(rows, cols),
            sigma: T::zero(),
            degenerate: true,
            converged: true,
        });
    }

    let mut best: Option<(Vec<T>, T, bool)> = None;
    for _attempt in 0..2 {
        let (v, lambda, converged) = power_iteration(g, tol, max_iter, rng)?;
        if best.as_ref().is_none_or(|b| lambda > b.1) {
            best = Some((v, lambda, converged));
        }
        if converged {
            break;
        }
    }
    let (v, lambda, converged) = best.expect("at least one attempt");
    let sigma = lambda.max(T::zero()).sqrt();
    let gv = g.matvec(&v);
    let norm = gv.iter().map(|x| *x * *x).sum::<T>().sqrt();
    let u: Vec<T> = gv.iter().map(|x| *x / norm).collect();
    let matrix = DenseMatrix::from_fn(rows, cols, |i, j| -radius * u[i] * v[j]);
    Ok(NuclearLmo { matrix, sigma, degenerate: false, converged })
}

fn power_iteration<T: Real>(
    g: &DenseMatrix<T>,
    tol: T,
    max_iter: usize,
    rng: &mut RngStream,
) -> Result<(Vec<T>, T, bool)> {
    let mut v = sample_unit_sphere::<T>(rng, g.cols())?.into_vec();
    let mut prev = T::neg_infinity();
    let mut lambda = T::zero();
    for _ in 0..max_iter.max(1) {
        let gv = g.matvec(&v);
        lambda = gv.iter().map(|x| *x * *x).sum();
        if (lambda - prev).abs() < tol * lambda.max(T::min_positive_value()) {
            return Ok((v, lambda, true));
        }
        prev = lambda;
        let w = g.transpose_matvec(&gv);
        let n = w.iter().map(|x| *x * *x).sum::<T>().sqrt();
        if n == T::zero() {
            // started orthogonal to the row space; keep what we have
            return Ok((v, lambda, false));
        }
        v = w.into_iter().map(|x| x / n).collect();
    }
    Ok((v, lambda, false))
}
