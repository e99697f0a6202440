//! Discrete-event network simulation: device firings, delayed message
//! delivery, environment changes (mobility and topology) and expiry of
//! messages from departed neighbours.

mod latency;
mod mobility;
mod sim;

use std::collections::{BTreeMap, BTreeSet};

use crate::calculus::{DeviceId, NbrField, SensorState, Value};
use crate::geometry::Point;
use crate::scheduler::{LocalStatusField, POSITION, TIME};

pub use latency::{weibull_from_uniform, LatencyModel, MIN_LATENCY};
pub use mobility::{
    levy_step, oscillate_step, pareto_from_uniform, MobilityMode, MobilityState, PARETO_SCALE,
};
pub use sim::{
    EventKind, SimError, SimParams, SimStats, Simulation, Timing, Transition, CLOCK_TIMER,
};

/// Sensor listing the current neighbours (self included) as a tuple of ids.
pub const NEIGHBOURS: &str = "neighbours";
/// Sensor giving the Euclidean distance to every neighbour (self at 0).
pub const NBR_RANGE: &str = "nbr_range";

pub type Topology = BTreeMap<DeviceId, BTreeSet<DeviceId>>;

/// Global status: the local status field of every device.
pub type GlobalStatus = BTreeMap<DeviceId, LocalStatusField>;

/// Network environment: neighbourhoods, static per-device sensors and positions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Environment {
    pub topology: Topology,
    pub sensor_field: BTreeMap<DeviceId, SensorState>,
    pub positions: BTreeMap<DeviceId, Point<f64>>,
}

impl Environment {
    pub fn devices(&self) -> impl Iterator<Item = DeviceId> + '_ {
        self.sensor_field.keys().copied()
    }

    pub fn neighbours(&self, device: DeviceId) -> Option<&BTreeSet<DeviceId>> {
        self.topology.get(&device)
    }
}

/// Topology and sensor field share their domain, and every neighbourhood
/// contains the device itself and only known devices.
pub fn check_well_formed(env: &Environment) -> bool {
    env.topology.len() == env.sensor_field.len()
        && env.topology.iter().all(|(d, nbrs)| {
            env.sensor_field.contains_key(d)
                && nbrs.contains(d)
                && nbrs.iter().all(|n| env.sensor_field.contains_key(n))
        })
}

/// Sensors the platform supplies at each firing: clock, position, the
/// neighbour list and per-neighbour distances.
pub fn platform_sensors(env: &Environment, device: DeviceId, time: f64) -> SensorState {
    let mut s = SensorState::new().with(TIME, time);
    let here = env.positions.get(&device).copied();
    if let Some(p) = here {
        s.set(POSITION, Value::tuple([p.x.into(), p.y.into()]));
    }
    if let Some(nbrs) = env.topology.get(&device) {
        s.set(
            NEIGHBOURS,
            Value::tuple(nbrs.iter().map(|n| Value::Number(f64::from(n.0)))),
        );
        let mut range = NbrField::new();
        for n in nbrs {
            let d = match (here, env.positions.get(n)) {
                _ if *n == device => 0.0,
                (Some(a), Some(b)) => a.distance(b),
                _ => f64::INFINITY,
            };
            range
                .insert(*n, Value::Number(d))
                .expect("numbers never nest");
        }
        s.set(NBR_RANGE, Value::Field(range));
    }
    s
}
