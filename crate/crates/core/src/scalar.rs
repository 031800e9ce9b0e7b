//! Scalar abstraction shared by the floating-point code paths.
//!
//! Everything numeric in the encoder, the kernel bank and the decoder is
//! written against [`Sample`], so the same code runs in `f32` or `f64`.
//! The tolerances quoted in the tests assume `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, NumCast};
use rustfft::FftNum;

/// floating point: f32 or f64
pub trait Sample:
    Float
    + FloatConst
    + FromPrimitive
    + FftNum
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal or runtime value into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("f64 is representable in every Sample type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Sample converts to f64")
    }
}

impl Sample for f32 {}
impl Sample for f64 {}

/// Sum of squares.
pub fn energy<T: Sample>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

pub fn dot<T: Sample>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}
