//! Scalar abstraction shared by every solver in the crate.
//!
//! The physics is written once against [`Real`]; `f64` is the production
//! scalar and `f32` compiles and runs for the well-conditioned paths.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Cplx<T> = Complex<T>;

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Vacuum light speed (m/s), the rounded value the resonator tables are
/// quoted with.
pub const LIGHT_SPEED: f64 = 3.0e8;

#[inline]
pub(crate) fn cx<T: Real>(re: T, im: T) -> Cplx<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn re<T: Real>(x: T) -> Cplx<T> {
    Complex::new(x, T::zero())
}

/// Wraps a phase difference into `(-pi, pi]`.
pub fn wrap_phase<T: Real>(mut d: T) -> T {
    let two_pi = T::PI() + T::PI();
    while d > T::PI() {
        d -= two_pi;
    }
    while d <= -T::PI() {
        d += two_pi;
    }
    d
}

/// Relative deviation `|a - b| / |b|`, falling back to the absolute
/// deviation when the reference is exactly zero.
pub fn rel_dev<T: Real>(value: Cplx<T>, reference: Cplx<T>) -> T {
    let d = (value - reference).norm();
    let n = reference.norm();
    if n > T::zero() {
        d / n
    } else {
        d
    }
}
