//! Scalar abstraction the numeric kernels are generic over.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar type: `f32` or `f64`.
///
/// The default pipeline runs at `f64` (see the crate-root aliases); `f32`
/// instantiations exist for memory-bound uses and share all the same code.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Conversion from `f64`, used for constants and configuration values.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 converts to any Scalar")
    }

    /// Widening (or identity) conversion to `f64`, used for reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
}
