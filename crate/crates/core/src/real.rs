use std::fmt::Debug;
use std::iter::Sum;

use half::f16;
use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::Float;

/// Floating-point scalar the network math is generic over.
///
/// Training runs in `f32`; gradient checks run the same code in `f64`.
pub trait Real:
    Float + LinalgScalar + ScalarOperand + Sum + Debug + Default + Send + Sync + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    /// Direct IEEE binary16 rounding (no intermediate rounding to `f32`).
    fn to_f16(self) -> f16;

    fn from_f32(x: f32) -> Self {
        Self::from_f64(f64::from(x))
    }
}

impl Real for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
    fn to_f16(self) -> f16 {
        f16::from_f32(self)
    }
    fn from_f32(x: f32) -> Self {
        x
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn to_f16(self) -> f16 {
        f16::from_f64(self)
    }
}
