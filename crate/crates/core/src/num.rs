//! Scalar abstraction for the geometric and statistical parts of the crate.
//!
//! The field calculus itself works on `f64` values; everything that is plain
//! numerics (positions, distances, distributions, filters, summary statistics)
//! is written once against [`Real`] and instantiated at the crate root.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// One step of an exponential low pass filter: `alpha * input + (1 - alpha) * state`.
pub fn low_pass<T: Real>(state: T, input: T, alpha: T) -> T {
    alpha * input + (T::one() - alpha) * state
}

/// Arithmetic mean; zero for an empty slice.
pub fn mean<T: Real>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    let n = T::from_usize(values.len()).unwrap_or_else(T::one);
    values.iter().fold(T::zero(), |acc, v| acc + *v) / n
}

/// Population standard deviation; zero for an empty slice.
pub fn std_dev<T: Real>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    let m = mean(values);
    let n = T::from_usize(values.len()).unwrap_or_else(T::one);
    let var = values
        .iter()
        .fold(T::zero(), |acc, v| acc + (*v - m) * (*v - m))
        / n;
    var.sqrt()
}

/// Area of the trapezoid between two samples of a piecewise-linear signal.
pub fn trapezoid<T: Real>(t0: T, y0: T, t1: T, y1: T) -> T {
    (t1 - t0) * (y0 + y1) / T::lit(2.0)
}
