//! Deployments: perturbed grids with their mobility and static sensors.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::calculus::{DeviceId, SensorState};
use crate::geometry::{recompute_topology, Arena, Point};
use crate::netsim::{Environment, MobilityState};
use crate::scheduler::ProgramNode;

use super::apps::{channel_tree, for_algorithm, gradient_tree, ChannelModules};
use super::{derive_rng, ExperimentError, ScenarioKind, ScenarioSpec, Stream};

/// Nominal distance between grid neighbours, m.
pub const GRID_SPACING: f64 = 5.0;
/// Devices are displaced uniformly within a disc of this radius, m.
pub const JITTER_RADIUS: f64 = 2.0;
/// Height of the oscillating device above the top row, m.
pub const MOBILE_OFFSET: f64 = 3.0;
/// Communication radius, m.
pub const COMM_RADIUS: f64 = 7.5;
/// Sensor flagging gradient sources.
pub const SOURCE: &str = "source";

pub struct Scenario {
    pub kind: ScenarioKind,
    pub env: Environment,
    pub mobility: BTreeMap<DeviceId, MobilityState>,
    pub tree: ProgramNode,
    /// Bounding box of the deployment; its diagonal caps distance errors.
    pub arena: Arena<f64>,
    /// Gradient sources (gradient and moving scenarios).
    pub sources: BTreeSet<DeviceId>,
    /// Channel endpoints.
    pub endpoints: Option<(DeviceId, DeviceId)>,
    pub channel_width: f64,
}

fn jittered<R: Rng>(rng: &mut R, nominal: Point<f64>, arena: &Arena<f64>) -> Point<f64> {
    let r = JITTER_RADIUS * rng.gen::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.gen::<f64>();
    arena.clamp(Point::new(
        nominal.x + r * theta.cos(),
        nominal.y + r * theta.sin(),
    ))
}

fn grid_arena(cols: usize, rows: usize) -> Arena<f64> {
    let w = (cols - 1) as f64 * GRID_SPACING;
    let h = (rows - 1) as f64 * GRID_SPACING;
    Arena::new(Point::new(0.0, 0.0), Point::new(w, h))
}

fn nearest(
    positions: &BTreeMap<DeviceId, Point<f64>>,
    among: impl Iterator<Item = DeviceId>,
    target: Point<f64>,
) -> DeviceId {
    among
        .min_by(|a, b| {
            positions[a]
                .distance(&target)
                .total_cmp(&positions[b].distance(&target))
                .then(a.cmp(b))
        })
        .expect("non-empty half")
}

/// Builds the deployment of `spec`; deployment randomness depends only on
/// the master seed, scenario and seed.
pub fn build_scenario(spec: &ScenarioSpec) -> Result<Scenario, ExperimentError> {
    spec.validate()?;
    let mut rng = derive_rng(spec.master_seed, spec.kind, spec.seed, Stream::Deployment);
    let (cols, rows) = spec.scale.dims(spec.kind);
    let grid = grid_arena(cols, rows);
    let mut positions = BTreeMap::new();
    for r in 0..rows {
        for c in 0..cols {
            let id = DeviceId((r * cols + c) as u32);
            let nominal = Point::new(c as f64 * GRID_SPACING, r as f64 * GRID_SPACING);
            positions.insert(id, jittered(&mut rng, nominal, &grid));
        }
    }
    let extra = DeviceId((rows * cols) as u32);
    let mut mobility = BTreeMap::new();
    let mut sources = BTreeSet::new();
    let mut endpoints = None;
    let (arena, tree) = match spec.kind {
        ScenarioKind::Gradient => {
            let y = grid.max.y + MOBILE_OFFSET;
            positions.insert(extra, Point::new(0.0, y));
            let line = Arena::new(Point::new(0.0, y), Point::new(grid.max.x, y));
            mobility.insert(extra, MobilityState::oscillate(spec.speed, line));
            sources.extend([DeviceId(0), extra]);
            (
                Arena::new(grid.min, Point::new(grid.max.x, y)),
                gradient_tree("gradient", SOURCE, spec.epsilon)?,
            )
        }
        ScenarioKind::Moving => {
            positions.insert(extra, grid.centre());
            for d in positions.keys() {
                mobility.insert(*d, MobilityState::levy(spec.speed, grid));
            }
            sources.insert(extra);
            (grid, gradient_tree("gradient", SOURCE, spec.epsilon)?)
        }
        ScenarioKind::Channel => {
            let half = cols / 2;
            let left = grid_arena(half, rows);
            let in_left = |d: &DeviceId| (d.0 as usize) % cols < half;
            for d in positions.keys().filter(|d| in_left(d)) {
                mobility.insert(*d, MobilityState::levy(spec.speed, left));
            }
            let right_centre = Point::new(
                (half as f64 * GRID_SPACING + grid.max.x) / 2.0,
                grid.centre().y,
            );
            let a = nearest(
                &positions,
                positions.keys().copied().filter(in_left),
                left.centre(),
            );
            let b = nearest(
                &positions,
                positions.keys().copied().filter(|d| !in_left(d)),
                right_centre,
            );
            endpoints = Some((a, b));
            (grid, channel_tree(spec.epsilon, spec.channel_width)?)
        }
    };
    let sensor_field = positions
        .keys()
        .map(|d| {
            let s = match endpoints {
                Some((a, b)) => SensorState::new()
                    .with(ChannelModules::SOURCE_A, *d == a)
                    .with(ChannelModules::SOURCE_B, *d == b),
                None => SensorState::new().with(SOURCE, sources.contains(d)),
            };
            (*d, s)
        })
        .collect();
    let env = Environment {
        topology: recompute_topology(&positions, COMM_RADIUS),
        sensor_field,
        positions,
    };
    Ok(Scenario {
        kind: spec.kind,
        env,
        mobility,
        tree: for_algorithm(tree, spec.algorithm),
        arena,
        sources,
        endpoints,
        channel_width: spec.channel_width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{Algorithm, GridScale};

    fn spec(kind: ScenarioKind) -> ScenarioSpec {
        let mut s = ScenarioSpec::new(kind, Algorithm::TimeFluid);
        s.speed = 1.0;
        s
    }

    #[test]
    fn gradient_deployment() {
        let sc = build_scenario(&spec(ScenarioKind::Gradient)).unwrap();
        assert_eq!(sc.env.positions.len(), 122);
        assert_eq!(sc.sources.len(), 2);
        assert_eq!(sc.mobility.values().filter(|m| m.is_mobile()).count(), 1);
        assert_eq!(sc.arena.max.y, 53.0);
        for (d, p) in &sc.env.positions {
            assert!(sc.arena.contains(p), "{d} at {p:?}");
        }
    }

    #[test]
    fn jitter_stays_within_radius() {
        let sc = build_scenario(&spec(ScenarioKind::Moving)).unwrap();
        for r in 0..11usize {
            for c in 0..11usize {
                let p = sc.env.positions[&DeviceId((r * 11 + c) as u32)];
                let nominal = Point::new(c as f64 * GRID_SPACING, r as f64 * GRID_SPACING);
                assert!(p.distance(&nominal) <= JITTER_RADIUS + 1e-12);
            }
        }
        assert_eq!(sc.mobility.len(), 122);
    }

    #[test]
    fn channel_endpoints_in_opposite_halves() {
        let sc = build_scenario(&spec(ScenarioKind::Channel)).unwrap();
        let (a, b) = sc.endpoints.unwrap();
        assert!(sc.env.positions[&a].x < 50.0 + JITTER_RADIUS);
        assert!(sc.env.positions[&b].x > 55.0 - JITTER_RADIUS);
        assert_eq!(sc.env.positions.len(), 242);
        assert!(sc.mobility.keys().all(|d| (d.0 as usize) % 22 < 11));
    }

    #[test]
    fn deployment_shared_across_algorithms() {
        let mut s = spec(ScenarioKind::Gradient);
        let a = build_scenario(&s).unwrap();
        s.algorithm = Algorithm::Classic;
        s.epsilon = 0.5;
        let b = build_scenario(&s).unwrap();
        assert_eq!(a.env.positions, b.env.positions);
        s.seed = 1;
        assert_ne!(build_scenario(&s).unwrap().env.positions, a.env.positions);
        s.scale = GridScale::Full;
        assert_eq!(build_scenario(&s).unwrap().env.positions.len(), 442);
    }
}
