//! Floating-point abstraction shared by the chain, model and metric code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar usable for probabilities, kernels and metric values.
///
/// Tolerances are per-type: the `f64` values are the reference ones, the
/// `f32` values are loosened to what single precision can actually certify.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Allowed deviation of a row or distribution sum from one.
    fn stochastic_tol() -> Self;
    /// Allowed L1 residual `||mu K - mu||` of a stationary solve.
    fn stationary_tol() -> Self;
    /// Entries at or below this value count as zero in convergence certificates.
    fn positivity_tol() -> Self;

    /// Converts an `f64` literal. Panics only if the value is not representable,
    /// which cannot happen for the float types implementing this trait.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn stochastic_tol() -> Self {
        1e-12
    }
    fn stationary_tol() -> Self {
        1e-10
    }
    fn positivity_tol() -> Self {
        1e-15
    }
}

impl Scalar for f32 {
    fn stochastic_tol() -> Self {
        1e-5
    }
    fn stationary_tol() -> Self {
        1e-4
    }
    fn positivity_tol() -> Self {
        1e-15
    }
}
