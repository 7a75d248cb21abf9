//! Scalar abstraction for the estimation core.
//!
//! Every numeric routine in the core is generic over [`Real`] so the same
//! code path serves `f32` and `f64`. Concrete aliases for the common `f64`
//! instantiations live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point scalar usable throughout the estimation core.
///
/// The single added method, [`Real::of`], converts `f64` algorithm constants
/// (kernel normalizers, polynomial coefficients, tolerances) into the working
/// scalar type. The conversion is lossy for `f32` by design; constants are
/// chosen so truncation stays below the type's own round-off.
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum<Self> + Send + Sync + Debug + Display + 'static
{
    /// Converts an `f64` constant into the scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in the scalar type")
    }

    /// Converts a count into the scalar type, for sample-size denominators.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in the scalar type")
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + NumAssign + Sum<T> + Send + Sync + Debug + Display + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converts_constants_in_both_widths() {
        assert_eq!(<f64 as Real>::of(0.75), 0.75);
        assert_eq!(<f32 as Real>::of(0.75), 0.75f32);
        assert_eq!(<f64 as Real>::of_usize(400), 400.0);
    }
}
