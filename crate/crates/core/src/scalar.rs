//! Scalar abstractions.
//!
//! Geometry and flow code is written against [`Real`] (implemented for `f32` and
//! `f64`). The cone-membership solver works over any ordered [`Field`], which
//! covers `f64` with a pivot tolerance and exact [`Rational`] arithmetic.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, Signed, ToPrimitive, Zero};

/// Floating point scalar: f32 or f64.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only for non-representable values,
    /// which cannot happen for the float types implementing this trait.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Exact rational numbers over arbitrary-precision integers.
pub type Rational = BigRational;

/// Ordered field used by the linear-feasibility solver.
///
/// `is_negligible` is exact zero for rationals and a fixed absolute
/// threshold for `f64` pivots.
pub trait Field:
    Clone + PartialOrd + Signed + Debug + Send + Sync + 'static
{
    fn is_negligible(&self) -> bool;
    fn from_f64_exact(x: f64) -> Option<Self>;
    fn to_f64_lossy(&self) -> f64;

    fn is_positive_strict(&self) -> bool {
        !self.is_negligible() && self.is_positive()
    }

    fn is_negative_strict(&self) -> bool {
        !self.is_negligible() && self.is_negative()
    }
}

/// Pivot threshold for floating-point simplex.
pub const F64_PIVOT_EPS: f64 = 1e-12;

impl Field for f64 {
    fn is_negligible(&self) -> bool {
        self.abs() <= F64_PIVOT_EPS
    }

    fn from_f64_exact(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

impl Field for BigRational {
    fn is_negligible(&self) -> bool {
        self.is_zero()
    }

    fn from_f64_exact(x: f64) -> Option<Self> {
        BigRational::from_float(x)
    }

    fn to_f64_lossy(&self) -> f64 {
        rational_to_f64(self)
    }
}

/// Nearest-ish `f64` to a rational, valid even when numerator or denominator
/// alone overflows `f64`.
fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let negative = r.is_negative();
    let num = r.numer().abs();
    let den = r.denom().abs();
    // scale so the integer quotient carries 64 significant bits
    let shift = 64 + den.bits() as i64 - num.bits() as i64;
    let quotient = if shift >= 0 {
        (num << shift as usize) / den
    } else {
        num / (den << (-shift) as usize)
    };
    let mut x = quotient.to_f64().unwrap_or(f64::INFINITY);
    let mut e = -shift;
    while e > 0 {
        let step = e.min(512);
        x *= 2f64.powi(step as i32);
        e -= step;
    }
    while e < 0 {
        let step = (-e).min(512);
        x /= 2f64.powi(step as i32);
        e += step;
    }
    if negative {
        -x
    } else {
        x
    }
}

/// Builds a rational from an integer.
pub fn rational_from_int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// Zero and one for any field, for readability at call sites.
pub fn zero<F: Field>() -> F {
    F::zero()
}

pub fn one<F: Field>() -> F {
    F::one()
}
