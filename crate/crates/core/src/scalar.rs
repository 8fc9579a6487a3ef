use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point element type used by landscapes, supernet weights,
/// attention blocks and leaderboard scores.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts from `f64`, rounding to the nearest representable value.
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 always converts to a float scalar")
    }

    fn of_usize(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize always converts to a float scalar")
    }

    /// Widens to `f64` for serialization and reporting.
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("float scalar always converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
