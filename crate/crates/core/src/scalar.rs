//! Scalar abstraction for the numeric parts of the crate.
//!
//! Environment dynamics are integer-only; everything that touches real numbers
//! (embeddings, shaping, the policy network, scoring) is generic over
//! [`Scalar`], implemented for `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// floating point: f32 or f64
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
    /// Lossy conversion from `f64`, used for constants and config values.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Raw bit pattern widened to 64 bits; used for exact hashing of parameters.
    fn bits(self) -> u64;
}

impl Scalar for f32 {
    fn bits(self) -> u64 {
        u64::from(self.to_bits())
    }
}

impl Scalar for f64 {
    fn bits(self) -> u64 {
        self.to_bits()
    }
}
