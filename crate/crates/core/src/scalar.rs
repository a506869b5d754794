//! Floating point scalar abstraction.
//!
//! All numerics in this crate are generic over [`Real`], so the same kernels
//! run in `f32` or `f64`. Concrete aliases for the default `f64` instantiation
//! live at the crate root.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand used throughout the crate for converting literals.
#[inline]
pub fn r<R: Real>(x: f64) -> R {
    R::of(x)
}
