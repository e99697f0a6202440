use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::geometry::{Arena, Point};
use crate::num::Real;

/// Minimum walk length of the Pareto leg distribution, in metres.
pub const PARETO_SCALE: f64 = 0.5;

/// Inverse CDF of the shape-1 Pareto with scale `k`: support `[k, inf)`.
pub fn pareto_from_uniform<T: Real>(u: T, k: T) -> T {
    k / (T::one() - u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobilityMode {
    Levy,
    OscillateX,
    Still,
}

/// Kinematic state of one device. Positions stay inside `arena`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityState {
    pub heading: f64,
    pub remaining_walk: f64,
    pub speed: f64,
    pub mode: MobilityMode,
    pub arena: Arena<f64>,
}

impl MobilityState {
    pub fn still(arena: Arena<f64>) -> Self {
        Self {
            heading: 0.0,
            remaining_walk: 0.0,
            speed: 0.0,
            mode: MobilityMode::Still,
            arena,
        }
    }

    pub fn levy(speed: f64, arena: Arena<f64>) -> Self {
        Self {
            heading: 0.0,
            remaining_walk: 0.0,
            speed,
            mode: MobilityMode::Levy,
            arena,
        }
    }

    pub fn oscillate(speed: f64, arena: Arena<f64>) -> Self {
        Self {
            heading: 0.0,
            remaining_walk: 0.0,
            speed,
            mode: MobilityMode::OscillateX,
            arena,
        }
    }

    pub fn is_mobile(&self) -> bool {
        self.mode != MobilityMode::Still && self.speed > 0.0
    }

    /// Advances `position` by `dt` seconds according to the mode.
    pub fn advance<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        position: Point<f64>,
        dt: f64,
    ) -> Point<f64> {
        match self.mode {
            MobilityMode::Levy => levy_step(rng, self, position, dt),
            MobilityMode::OscillateX => oscillate_step(self, position, dt),
            MobilityMode::Still => position,
        }
    }
}

/// Lévy walk: straight legs of Pareto length along uniform headings. A new
/// leg starts when the current one is used up or the device bounces off the
/// arena boundary.
pub fn levy_step<R: Rng + ?Sized>(
    rng: &mut R,
    state: &mut MobilityState,
    position: Point<f64>,
    dt: f64,
) -> Point<f64> {
    if state.speed <= 0.0 || dt <= 0.0 {
        return position;
    }
    let arena = state.arena;
    let mut pos = position;
    let mut budget = state.speed * dt;
    for _ in 0..64 {
        if budget <= 1e-12 {
            break;
        }
        if state.remaining_walk <= 0.0 {
            state.heading = rng.gen::<f64>() * TAU;
            state.remaining_walk = pareto_from_uniform(rng.gen::<f64>(), PARETO_SCALE);
        }
        let step = budget.min(state.remaining_walk);
        let (x, hit_x) =
            Arena::reflect_axis(pos.x + step * state.heading.cos(), arena.min.x, arena.max.x);
        let (y, hit_y) =
            Arena::reflect_axis(pos.y + step * state.heading.sin(), arena.min.y, arena.max.y);
        pos = Point::new(x, y);
        budget -= step;
        state.remaining_walk -= step;
        if hit_x || hit_y {
            state.remaining_walk = 0.0;
        }
    }
    arena.clamp(pos)
}

/// Horizontal back-and-forth motion between the arena's x-limits; `y` is fixed.
pub fn oscillate_step(state: &mut MobilityState, position: Point<f64>, dt: f64) -> Point<f64> {
    if state.speed <= 0.0 || dt <= 0.0 {
        return position;
    }
    let (lo, hi) = (state.arena.min.x, state.arena.max.x);
    let dir = if state.heading.cos() >= 0.0 {
        1.0
    } else {
        -1.0
    };
    let raw = position.x + dir * state.speed * dt;
    let (x, _) = Arena::reflect_axis(raw, lo, hi);
    // The heading ends up pointing away from the last wall crossed.
    let width = hi - lo;
    let crossings = if width > 0.0 {
        if raw >= hi {
            ((raw - hi) / width).floor() as i64 + 1
        } else if raw <= lo {
            ((lo - raw) / width).floor() as i64 + 1
        } else {
            0
        }
    } else {
        0
    };
    if crossings % 2 == 1 {
        state.heading = if dir > 0.0 { PI } else { 0.0 };
    }
    Point::new(x, position.y)
}
