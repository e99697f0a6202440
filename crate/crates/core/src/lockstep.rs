//! Synchronous-rounds driver: every device fires once per round against the
//! exports of the previous round. Handy for checking convergence properties
//! without latency or mobility.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::calculus::{DeviceId, Program, SensorState, Value};
use crate::geometry::{recompute_topology, Point};
use crate::netsim::{check_well_formed, platform_sensors, Environment, GlobalStatus, SimError};
use crate::scheduler::{always, evaluate_program_tree, ExportMessage, ProgramNode, SchedulerState};
use crate::trigger::Trigger;

/// Timer id of lockstep rounds.
pub const LOCKSTEP_TIMER: &str = "lockstep";

pub struct Lockstep {
    tree: ProgramNode,
    env: Environment,
    status: GlobalStatus,
    sched: BTreeMap<DeviceId, SchedulerState>,
    period: f64,
    completed: u64,
}

impl Lockstep {
    pub fn new(tree: ProgramNode, env: Environment) -> Result<Self, SimError> {
        tree.validate().map_err(SimError::InvalidTree)?;
        if !check_well_formed(&env) {
            return Err(SimError::IllFormedEnvironment);
        }
        let sched = env
            .devices()
            .map(|d| (d, SchedulerState::new(&tree)))
            .collect();
        let status = env.devices().map(|d| (d, BTreeMap::new())).collect();
        Ok(Self {
            tree,
            env,
            status,
            sched,
            period: 1.0,
            completed: 0,
        })
    }

    /// Single always-enabled node running `program`.
    pub fn from_program(program: Program, env: Environment) -> Result<Self, SimError> {
        Self::new(ProgramNode::new("main", program, always()), env)
    }

    /// `n` devices on the x axis, `spacing` apart, linked to adjacent devices only.
    pub fn line_environment(n: usize, spacing: f64) -> Environment {
        let positions: Vec<(f64, f64)> = (0..n).map(|i| (i as f64 * spacing, 0.0)).collect();
        let edges: Vec<(u32, u32)> = (1..n as u32).map(|i| (i - 1, i)).collect();
        Self::explicit_environment(&positions, &edges)
    }

    /// Devices `0..` at `positions`, with symmetric links along `edges`.
    pub fn explicit_environment(positions: &[(f64, f64)], edges: &[(u32, u32)]) -> Environment {
        let ids = (0..positions.len() as u32).map(DeviceId);
        let mut topology: BTreeMap<DeviceId, BTreeSet<DeviceId>> =
            ids.clone().map(|d| (d, BTreeSet::from([d]))).collect();
        for (a, b) in edges {
            topology
                .entry(DeviceId(*a))
                .or_default()
                .insert(DeviceId(*b));
            topology
                .entry(DeviceId(*b))
                .or_default()
                .insert(DeviceId(*a));
        }
        Environment {
            topology,
            sensor_field: ids.clone().map(|d| (d, SensorState::new())).collect(),
            positions: ids
                .zip(positions)
                .map(|(d, (x, y))| (d, Point::new(*x, *y)))
                .collect(),
        }
    }

    /// Unit-disc environment over `positions`.
    pub fn disc_environment(positions: &[(f64, f64)], radius: f64) -> Environment {
        let positions: BTreeMap<DeviceId, Point<f64>> = positions
            .iter()
            .enumerate()
            .map(|(i, (x, y))| (DeviceId(i as u32), Point::new(*x, *y)))
            .collect();
        Environment {
            topology: recompute_topology(&positions, radius),
            sensor_field: positions.keys().map(|d| (*d, SensorState::new())).collect(),
            positions,
        }
    }

    pub fn set_period(&mut self, period: f64) {
        self.period = period;
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    /// Sensors and positions may be edited between rounds; the topology must stay well formed.
    pub fn env_mut(&mut self) -> &mut Environment {
        &mut self.env
    }

    pub fn devices(&self) -> Vec<DeviceId> {
        self.env.devices().collect()
    }

    pub fn completed_rounds(&self) -> u64 {
        self.completed
    }

    pub fn export_of(&self, device: DeviceId) -> Option<&Arc<ExportMessage>> {
        self.status.get(&device)?.get(&device)
    }

    pub fn root(&self, device: DeviceId) -> Option<&Value> {
        self.export_of(device)?.root()
    }

    /// Root of `module` at `device`.
    pub fn module_root(&self, device: DeviceId, module: &str) -> Option<&Value> {
        let path = self.tree.module_paths().remove(module)?;
        self.export_of(device)?.at(&path)?.root()
    }

    /// One synchronous round. Returns whether any export changed.
    pub fn round(&mut self) -> Result<bool, SimError> {
        if !check_well_formed(&self.env) {
            return Err(SimError::IllFormedEnvironment);
        }
        let time = self.completed as f64 * self.period;
        let mut fresh = BTreeMap::new();
        for (d, base) in &self.env.sensor_field {
            let mut sensors = base.clone();
            sensors.extend_from(&platform_sensors(&self.env, *d, time));
            sensors.set_trigger(Trigger::tick(LOCKSTEP_TIMER));
            let empty = BTreeMap::new();
            let status = self.status.get(d).unwrap_or(&empty);
            let state = self
                .sched
                .entry(*d)
                .or_insert_with(|| SchedulerState::new(&self.tree));
            let export = evaluate_program_tree(*d, &self.tree, state, status, &sensors)
                .map_err(|source| SimError::Schedule { device: *d, source })?;
            fresh.insert(*d, Arc::new(export));
        }
        let mut changed = false;
        for (d, nbrs) in &self.env.topology {
            changed |= self.export_of(*d).map(Arc::as_ref) != fresh.get(d).map(Arc::as_ref);
            let status = nbrs.iter().map(|n| (*n, Arc::clone(&fresh[n]))).collect();
            self.status.insert(*d, status);
        }
        self.completed += 1;
        Ok(changed)
    }

    pub fn rounds(&mut self, n: usize) -> Result<(), SimError> {
        for _ in 0..n {
            self.round()?;
        }
        Ok(())
    }

    /// Runs until a round changes no export; returns the rounds executed.
    pub fn run_until_stable(&mut self, max_rounds: usize) -> Result<usize, SimError> {
        for k in 1..=max_rounds {
            if !self.round()? {
                return Ok(k);
            }
        }
        Err(SimError::NoFixpoint(max_rounds))
    }
}
