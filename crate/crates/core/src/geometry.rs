//! Planar geometry and unit-disc connectivity.

use std::collections::{BTreeMap, BTreeSet};

use crate::calculus::DeviceId;
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_squared(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Axis-aligned rectangle, bounds inclusive. A degenerate rectangle (zero
/// height) models a horizontal rail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arena<T> {
    pub min: Point<T>,
    pub max: Point<T>,
}

impl<T: Real> Arena<T> {
    pub fn new(min: Point<T>, max: Point<T>) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> T {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> T {
        self.max.y - self.min.y
    }

    pub fn diagonal(&self) -> T {
        self.width().hypot(self.height())
    }

    pub fn centre(&self) -> Point<T> {
        let two = T::lit(2.0);
        Point::new(
            (self.min.x + self.max.x) / two,
            (self.min.y + self.max.y) / two,
        )
    }

    pub fn contains(&self, p: &Point<T>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn clamp(&self, p: Point<T>) -> Point<T> {
        Point::new(
            p.x.max(self.min.x).min(self.max.x),
            p.y.max(self.min.y).min(self.max.y),
        )
    }

    /// Mirrors a coordinate back inside `[lo, hi]`. Returns the folded
    /// coordinate and whether a wall was crossed.
    pub(crate) fn reflect_axis(v: T, lo: T, hi: T) -> (T, bool) {
        if hi <= lo {
            return (lo, v != lo);
        }
        let mut v = v;
        let mut hit = false;
        // a step never exceeds a few arena widths; the bound keeps NaN inputs finite
        for _ in 0..64 {
            if v < lo {
                v = lo + (lo - v);
                hit = true;
            } else if v > hi {
                v = hi - (v - hi);
                hit = true;
            } else {
                return (v, hit);
            }
        }
        (v.max(lo).min(hi), true)
    }
}

/// Symmetric unit-disc neighbourhood: `b` neighbours `a` iff their distance is
/// at most `radius` (inclusive). Every device neighbours itself.
pub fn recompute_topology<T: Real>(
    positions: &BTreeMap<DeviceId, Point<T>>,
    radius: T,
) -> BTreeMap<DeviceId, BTreeSet<DeviceId>> {
    let r2 = radius * radius;
    let ids: Vec<_> = positions.iter().map(|(id, p)| (*id, *p)).collect();
    let mut topology: BTreeMap<DeviceId, BTreeSet<DeviceId>> = ids
        .iter()
        .map(|(id, _)| (*id, BTreeSet::from([*id])))
        .collect();
    for (i, (a, pa)) in ids.iter().enumerate() {
        for (b, pb) in &ids[i + 1..] {
            if pa.distance_squared(pb) <= r2 {
                topology.get_mut(a).expect("seeded above").insert(*b);
                topology.get_mut(b).expect("seeded above").insert(*a);
            }
        }
    }
    topology
}
