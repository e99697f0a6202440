//! Deterministic discrete-event simulation of field computations whose
//! rounds are scheduled by local predicates (time-fluid) rather than clocks.

pub mod blocks;
pub mod calculus;
pub mod experiments;
pub mod geometry;
pub mod lockstep;
pub mod netsim;
pub mod num;
pub mod scheduler;
pub mod trigger;

/// Positions in metres, at the precision the simulator uses.
pub type Point = geometry::Point<f64>;
pub type Arena = geometry::Arena<f64>;
