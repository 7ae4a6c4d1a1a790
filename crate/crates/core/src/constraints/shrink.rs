use super::set::{FeasibleSet, SetKind};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// The shrunk-and-translated domain `(X'_δ ∩ K) − δ𝟏` where
/// `X'_δ = ∏[δ, a_i − δ]` and `box_upper = a`.
///
/// Supported for boxes (result is again a box) and partition-matroid
/// polytopes (result is a box ∩ translated polytope).
pub fn shrink_translate<T: Real>(set: &FeasibleSet<T>, box_upper: &[T], delta: T) -> Result<FeasibleSet<T>> {
    if box_upper.len() != set.dim() {
        return Err(Error::DimensionMismatch { expected: set.dim(), got: box_upper.len() });
    }
    if !(delta.is_finite() && delta >= T::zero()) {
        return Err(Error::InvalidParameter(format!("delta must be non-negative, got {delta}")));
    }
    if delta == T::zero() {
        return Ok(set.clone());
    }
    let two = T::lit(2.0);
    let min_a = box_upper.iter().copied().fold(T::infinity(), T::min);
    if !(delta < min_a / two) {
        return Err(Error::InfeasibleShrink(format!(
            "delta {delta} must be below half the smallest box side {min_a}"
        )));
    }
    let shrunk: Vec<T> = box_upper.iter().map(|a| *a - two * delta).collect();
    match set.kind() {
        SetKind::Box { lower, upper } => {
            for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
                if *l < -T::membership_tol() || *u > box_upper[i] + T::membership_tol() {
                    return Err(Error::InvalidSet(format!("coordinate {i} of the set leaves the box")));
                }
            }
            let lo: Vec<T> = lower.iter().map(|l| (*l - delta).max(T::zero())).collect();
            let hi: Vec<T> = upper.iter().zip(&shrunk).map(|(u, s)| (*u - delta).min(*s)).collect();
            if let Some(i) = (0..lo.len()).find(|&i| lo[i] > hi[i]) {
                return Err(Error::InfeasibleShrink(format!("coordinate {i} becomes empty")));
            }
            FeasibleSet::boxed(lo, hi)
        }
        SetKind::PartitionMatroidPolytope(_) => {
            if box_upper.iter().any(|a| *a < T::one() - T::membership_tol()) {
                return Err(Error::InvalidSet("matroid polytope must lie inside the box".into()));
            }
            FeasibleSet::intersection(shrunk, set.clone(), delta)
        }
        _ => Err(Error::Unsupported(
            "shrink_translate supports boxes and partition-matroid polytopes".into(),
        )),
    }
}
