//! Floating-point scalar abstraction.
//!
//! All numerical code in the crate is written against [`Real`], so the same
//! fitting and diagnostics routines run in `f32` or `f64`. The binary tools
//! always instantiate `f64`.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Converts an `f64` constant into `Self`.
    fn lit(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    /// Machine epsilon of the type.
    fn machine_eps() -> Self;
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }

    #[inline]
    fn machine_eps() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }

    #[inline]
    fn machine_eps() -> Self {
        f64::EPSILON
    }
}
