//! Minimal scalar abstraction so that fields, tridiagonal solves and
//! interpolation work on both real and complex samples.

use core::fmt::Debug;
use num_complex::Complex64;
use num_traits::{Float, NumAssign};

pub trait Scalar: Copy + Debug + PartialEq + NumAssign + core::ops::Neg<Output = Self> + Send + Sync + 'static {
    fn from_real(x: f64) -> Self;
    fn abs2(self) -> f64;
    fn magnitude(self) -> f64 {
        self.abs2().sqrt()
    }
    /// `Re(self * conj(other))`.
    fn re_dot(self, other: Self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    #[inline]
    fn from_real(x: f64) -> Self {
        x
    }
    #[inline]
    fn abs2(self) -> f64 {
        self * self
    }
    #[inline]
    fn magnitude(self) -> f64 {
        self.abs()
    }
    #[inline]
    fn re_dot(self, other: Self) -> f64 {
        self * other
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn is_finite(self) -> bool {
        Float::is_finite(self)
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn abs2(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
    #[inline]
    fn re_dot(self, other: Self) -> f64 {
        self.re * other.re + self.im * other.im
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        Complex64::new(self.re * s, self.im * s)
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}
