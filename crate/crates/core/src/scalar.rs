//! Numeric field abstraction used by the linear-programming layer.
//!
//! The simplex backend is written once against [`Scalar`] and instantiated for
//! `f64`, `f32` and exact big rationals. Floating types carry tolerances; the
//! rational type uses exact zero tests.

use std::fmt::Debug;

use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};

pub trait Scalar:
    Clone + Debug + PartialOrd + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Primal feasibility tolerance on scaled rows and bounds.
    fn feasibility_tol() -> Self;
    /// Reduced-cost tolerance for optimality.
    fn optimality_tol() -> Self;
    /// Smallest magnitude accepted as a pivot element.
    fn pivot_tol() -> Self;
    /// Magnitude below which computed tableau entries are flushed to zero.
    fn zero_tol() -> Self;
    /// Whether the arithmetic is exact (no drift, no refactorisation needed).
    fn is_exact() -> bool;

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite value representable in scalar type")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn is_finite_value(&self) -> bool {
        self.to_f64().map(f64::is_finite).unwrap_or(false)
    }

    fn max_of(a: Self, b: Self) -> Self {
        if a >= b {
            a
        } else {
            b
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if a <= b {
            a
        } else {
            b
        }
    }

    /// True when `|self| <= tol`.
    fn near_zero(&self, tol: &Self) -> bool {
        self.abs() <= *tol
    }
}

impl Scalar for f64 {
    fn feasibility_tol() -> Self {
        1e-9
    }
    fn optimality_tol() -> Self {
        1e-9
    }
    fn pivot_tol() -> Self {
        1e-11
    }
    fn zero_tol() -> Self {
        1e-14
    }
    fn is_exact() -> bool {
        false
    }
}

impl Scalar for f32 {
    fn feasibility_tol() -> Self {
        1e-5
    }
    fn optimality_tol() -> Self {
        1e-5
    }
    fn pivot_tol() -> Self {
        1e-6
    }
    fn zero_tol() -> Self {
        1e-8
    }
    fn is_exact() -> bool {
        false
    }
}

impl Scalar for BigRational {
    fn feasibility_tol() -> Self {
        BigRational::zero()
    }
    fn optimality_tol() -> Self {
        BigRational::zero()
    }
    fn pivot_tol() -> Self {
        BigRational::zero()
    }
    fn zero_tol() -> Self {
        BigRational::zero()
    }
    fn is_exact() -> bool {
        true
    }

    fn from_f64_lossy(v: f64) -> Self {
        // every finite double is a dyadic rational, so this conversion is exact
        BigRational::from_float(v).expect("finite value")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or_else(|| {
            let n = self.numer().to_f64().unwrap_or(f64::NAN);
            let d = self.denom().to_f64().unwrap_or(f64::NAN);
            n / d
        })
    }

    fn is_finite_value(&self) -> bool {
        true
    }

    fn near_zero(&self, _tol: &Self) -> bool {
        self.is_zero()
    }
}

/// Power of two nearest to `1 / magnitude`, used for equilibration so that
/// scaling is exact in binary floating point and in rationals.
pub(crate) fn pow2_reciprocal(magnitude: f64) -> f64 {
    if !(magnitude.is_finite() && magnitude > 0.0) {
        return 1.0;
    }
    let e = magnitude.log2().round() as i32;
    2f64.powi(-e.clamp(-60, 60))
}
