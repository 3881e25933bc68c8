//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, NumAssign};
use rustfft::FftNum;

/// Real floating point scalar: `f32` or `f64`.
///
/// Everything that touches an FFT needs [`FftNum`], so the bound is part of
/// the trait rather than repeated on each item.
pub trait Real:
    Float + FloatConst + NumAssign + FftNum + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or parameter.
    fn of(x: f64) -> Self;

    /// Conversion from an index or count.
    fn of_usize(n: usize) -> Self {
        Self::of(n as f64)
    }

    fn to_f64_lossy(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub(crate) fn axpy<T: Real>(y: &mut [T], alpha: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn scale<T: Real>(y: &mut [T], alpha: T) {
    for yi in y.iter_mut() {
        *yi *= alpha;
    }
}

/// `i·z`.
#[inline]
pub(crate) fn mul_i<T: Real>(z: num_complex::Complex<T>) -> num_complex::Complex<T> {
    num_complex::Complex::new(-z.im, z.re)
}
