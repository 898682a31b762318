//! Scalar abstraction for the numeric core.
//!
//! Spline bases, the crossbasis, and the GLM fitter are generic over [`Real`]
//! so they work with `f32` or `f64` (the pipeline and CLI run on `f64`; see
//! the type aliases at the crate root).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point bound used throughout the numeric core.
pub trait Real:
    Float + NumAssign + FromPrimitive + Sum + Send + Sync + Debug + Display + 'static
{
}

impl<T> Real for T where
    T: Float + NumAssign + FromPrimitive + Sum + Send + Sync + Debug + Display + 'static
{
}

/// Shorthand for converting an `f64` constant into the working scalar.
#[inline]
pub fn real<R: Real>(x: f64) -> R {
    R::from_f64(x).expect("f64 constant must be representable")
}

/// Shorthand for converting a `usize` into the working scalar.
#[inline]
pub fn real_usize<R: Real>(n: usize) -> R {
    R::from_usize(n).expect("usize must be representable")
}
