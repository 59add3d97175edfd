//! Scalar abstraction so the numeric code runs on `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar used throughout the crate.
///
/// Concrete aliases for the `f64` instantiations of the main types live at
/// the crate root.
pub trait Scalar:
    Float + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` constant into the working scalar type.
pub(crate) fn cast<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("f64 constant must be representable in the scalar type")
}

/// Lossy view of a scalar as `f64`, for diagnostics and error messages.
pub(crate) fn as_f64<S: Scalar>(x: S) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
