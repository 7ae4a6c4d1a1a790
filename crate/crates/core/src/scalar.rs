//! Scalar abstraction for the linear-algebra and constraint layers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar usable by vectors, matrices and linear oracles.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance used by membership tests at this precision.
    fn membership_tol() -> Self;
}

impl Real for f64 {
    fn membership_tol() -> Self {
        1e-9
    }
}

impl Real for f32 {
    fn membership_tol() -> Self {
        1e-4
    }
}
