//! Scalar abstraction, dense tensors, and deterministic random streams.

mod prng;
mod tensor;

pub use prng::{gaussian_sample, prng_stream, Prng};
pub use tensor::{clamp01, Tensor};

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// Floating-point element type for all numeric code in this crate.
///
/// `f64` is the precision the shipped tools use; `f32` is supported for
/// callers that trade accuracy for memory. Tolerances quoted in docs and
/// tests assume `f64`.
pub trait Scalar:
    Float
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
    /// Converts a finite `f64` constant into this scalar type.
    #[inline]
    fn cast(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("finite f64 constant")
    }

    /// Exact widening to `f64` (both supported types embed losslessly).
    #[inline]
    fn into_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("scalar widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
