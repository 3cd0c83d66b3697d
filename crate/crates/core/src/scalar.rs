use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating point scalar the numerical core is generic over: `f32` or `f64`.
///
/// On-disk formats always store 64-bit floats, so `f32` values widen on write
/// and narrow back losslessly on read.
pub trait Real:
    Float + FromPrimitive + Debug + Display + LowerExp + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite conversion")
    }

    fn from_count(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

impl Real for f32 {}
impl Real for f64 {}
