//! Per-sample error, round statistics and the running efficiency integral.

use crate::num::{mean, std_dev, trapezoid};

/// Absolute error of a computed distance. Both infinite is exact; a single
/// infinite side counts as `cap` (the arena diagonal).
pub fn distance_error(computed: f64, oracle: f64, cap: f64) -> f64 {
    match (computed.is_infinite(), oracle.is_infinite()) {
        (true, true) => 0.0,
        (false, false) => (computed - oracle).abs(),
        _ => cap,
    }
}

/// One sampled point of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub time: f64,
    pub mean_error: f64,
    pub mean_rounds: f64,
    pub stdev_rounds: f64,
    /// Time integral of the mean error so far, times the mean round count.
    pub efficiency: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    integral: f64,
    last: Option<(f64, f64)>,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Samples must come in increasing time order.
    pub fn sample(&mut self, time: f64, errors: &[f64], rounds: &[f64]) -> MetricsRow {
        let mean_error = mean(errors);
        if let Some((t0, e0)) = self.last {
            self.integral += trapezoid(t0, e0, time, mean_error);
        }
        self.last = Some((time, mean_error));
        let mean_rounds = mean(rounds);
        MetricsRow {
            time,
            mean_error,
            mean_rounds,
            stdev_rounds: std_dev(rounds),
            efficiency: self.integral * mean_rounds,
        }
    }
}
