use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Number types the parity formulas run on: `f32`, `f64`, and exact
/// rationals such as `num_rational::Rational64`.
pub trait Scalar:
    Num + Signed + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync
{
}

impl<T> Scalar for T where
    T: Num + Signed + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync
{
}
