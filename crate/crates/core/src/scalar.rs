//! Floating point abstraction used by the phase function and the jet algebra.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar the phase-level code is generic over (`f32`, `f64`).
pub trait Scalar:
    Float + FloatConst + FromPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Machine epsilon scaled for default tolerances.
    #[inline]
    fn tiny() -> Self {
        Self::epsilon() * Self::lit(64.0)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
