//! Scalar abstractions.
//!
//! [`Field`] needs only exact field arithmetic and an order, so payoff tables
//! can be evaluated over rationals. [`Scalar`] adds the floating-point surface
//! used by the numerical routines.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, Neg, SubAssign};

use num_traits::{Float, FromPrimitive, Num, NumCast};

pub trait Field: Clone + PartialOrd + Debug + Num + Neg<Output = Self> {
    fn from_i64(v: i64) -> Self;
}

impl Field for f32 {
    fn from_i64(v: i64) -> Self {
        v as f32
    }
}

impl Field for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
}

impl Field for num_rational::BigRational {
    fn from_i64(v: i64) -> Self {
        num_rational::BigRational::from_integer(v.into())
    }
}

pub trait Scalar:
    Field
    + Float
    + FromPrimitive
    + NumCast
    + Copy
    + Display
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn c(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("representable constant")
    }

    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("representable integer")
    }

    fn pi() -> Self {
        Self::c(std::f64::consts::PI)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
