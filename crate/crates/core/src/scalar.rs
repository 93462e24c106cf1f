//! Scalar abstraction for the numerical core.
//!
//! All physics code is generic over a real scalar type so the same routines
//! run in `f32` or `f64`. Complex quantities use `num_complex::Complex<R>`.

use num_complex::Complex;

/// Real scalar type underlying all matrices, rates, and frequencies.
pub trait RealScalar:
    nalgebra::RealField + num_traits::FromPrimitive + num_traits::ToPrimitive + Copy + Default
{
}

impl<T> RealScalar for T where
    T: nalgebra::RealField + num_traits::FromPrimitive + num_traits::ToPrimitive + Copy + Default
{
}

/// Convert an `f64` literal or intermediate into the working scalar type.
#[inline]
pub fn num<R: RealScalar>(x: f64) -> R {
    R::from_f64(x).expect("f64 -> scalar conversion")
}

/// Complex number with zero imaginary part.
#[inline]
pub fn re<R: RealScalar>(x: R) -> Complex<R> {
    Complex::new(x, R::zero())
}

/// Purely imaginary complex number.
#[inline]
pub fn im<R: RealScalar>(x: R) -> Complex<R> {
    Complex::new(R::zero(), x)
}

/// Tolerance stated for `f64` arithmetic, rescaled to the working precision.
///
/// For `f64` this returns `tol64` unchanged; for `f32` the tolerance widens in
/// proportion to the machine epsilon ratio.
#[inline]
pub fn scaled_tol<R: RealScalar>(tol64: f64) -> R {
    let eps_ratio = R::default_epsilon() / num::<R>(f64::EPSILON);
    num::<R>(tol64) * eps_ratio.max(R::one())
}
