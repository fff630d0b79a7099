//! Scalar abstraction for the numeric kernels.
//!
//! Entropy, correlation, the classification metrics, and the PAC
//! calculators only need ordinary float arithmetic, so they are written
//! against this trait and work for both `f32` and `f64`. The pipeline and
//! all wire types use [`crate::Score`].

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable by the statistics kernels.
pub trait Real:
    Float + FromPrimitive + AddAssign + SubAssign + Sum + Debug + Display + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Convert an `f64` constant into the working scalar.
pub fn real<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("finite f64 constant")
}

/// Convert a count into the working scalar.
pub fn count<F: Real>(n: usize) -> F {
    F::from_usize(n).unwrap_or_else(|| real(n as f64))
}
