use rand::Rng;

use crate::num::Real;

/// Smallest delay a message can take, in seconds.
pub const MIN_LATENCY: f64 = 1e-9;

/// Inverse CDF of the shape-1 Weibull with the given scale (its mean),
/// clamped away from zero.
pub fn weibull_from_uniform<T: Real>(u: T, scale: T) -> T {
    let x = scale * -(T::one() - u).ln();
    x.max(T::lit(MIN_LATENCY))
}

/// Exponentially distributed message latency (Weibull with shape 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyModel {
    mean: f64,
}

impl LatencyModel {
    /// `None` unless `mean` is a positive finite number of seconds.
    pub fn new(mean: f64) -> Option<Self> {
        (mean > 0.0 && mean.is_finite()).then_some(Self { mean })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        weibull_from_uniform(rng.gen::<f64>(), self.mean)
    }
}
