use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::calculus::{DeviceId, SensorState, Value};
use crate::geometry::recompute_topology;
use crate::scheduler::{
    evaluate_shaped, ExportMessage, LocalStatusField, ProgramNode, ScheduleError, SchedulerState,
};
use crate::trigger::Trigger;

use super::{
    check_well_formed, platform_sensors, Environment, GlobalStatus, LatencyModel, MobilityState,
    NEIGHBOURS,
};
use crate::scheduler::{POSITION, TIME};

/// Timer id used by clock-driven devices.
pub const CLOCK_TIMER: &str = "clock";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),
    #[error("environment is not well formed")]
    IllFormedEnvironment,
    #[error("invalid application tree: {0}")]
    InvalidTree(ScheduleError),
    #[error("no fixpoint within {0} rounds")]
    NoFixpoint(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("device {device}: {source}")]
    Schedule {
        device: DeviceId,
        #[source]
        source: ScheduleError,
    },
}

/// What makes devices fire on their own.
#[derive(Debug, Clone, PartialEq)]
pub enum Timing {
    /// Every device fires once at time zero with `boot`; afterwards only
    /// platform events (sensor changes, messages, timeouts) cause rounds.
    Reactive { boot: Trigger },
    /// Unsynchronised clocks: device ticks at `phase + k * period`, with the
    /// phase drawn uniformly in `[0, period)`.
    Clock { period: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub latency: LatencyModel,
    /// Mobility integration and topology refresh interval, seconds.
    pub env_step: f64,
    /// Communication radius, metres.
    pub radius: f64,
    /// Grace period before messages of a departed neighbour time out, seconds.
    pub retention: f64,
    pub timing: Timing,
}

impl SimParams {
    pub fn new(latency_mean: f64, timing: Timing) -> Result<Self, SimError> {
        let latency = LatencyModel::new(latency_mean).ok_or_else(|| {
            SimError::InvalidParameter(format!("mean latency must be positive, got {latency_mean}"))
        })?;
        if let Timing::Clock { period } = timing {
            if !(period > 0.0 && period.is_finite()) {
                return Err(SimError::InvalidParameter(format!(
                    "clock period must be positive, got {period}"
                )));
            }
        }
        Ok(Self {
            latency,
            env_step: 0.1,
            radius: 7.5,
            retention: 5.0,
            timing,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    Fire {
        device: DeviceId,
        trigger: Trigger,
    },
    Deliver {
        to: DeviceId,
        from: DeviceId,
        message: Arc<ExportMessage>,
        seq: u64,
    },
    Expire {
        holder: DeviceId,
        sender: DeviceId,
        token: u64,
    },
    EnvStep,
    Tick {
        device: DeviceId,
        k: u64,
    },
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::Fire { device, trigger } => write!(f, "fire {device} {trigger}"),
            EventKind::Deliver { to, from, seq, .. } => write!(f, "deliver #{seq} {from}->{to}"),
            EventKind::Expire { holder, sender, .. } => write!(f, "expire {sender} at {holder}"),
            EventKind::EnvStep => write!(f, "environment step"),
            EventKind::Tick { device, k } => write!(f, "tick {k} at {device}"),
        }
    }
}

/// A processed event.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub time: f64,
    pub kind: EventKind,
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={:.6} {}", self.time, self.kind)
    }
}

struct Queued {
    time: f64,
    seq: u64,
    // boxed: heap sifts then move small items
    kind: Box<EventKind>,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // reversed: BinaryHeap pops the earliest (time, seq) first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct PendingExpiry {
    token: u64,
    deadline: f64,
    modules: Vec<String>,
}

/// Counters of processed work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimStats {
    pub fires: u64,
    pub deliveries: u64,
    pub timeouts: u64,
    pub env_changes: u64,
}

/// A running network: environment, per-device status and scheduler state,
/// and the pending event queue. Single-threaded and fully determined by its
/// inputs and generator.
pub struct Simulation {
    tree: ProgramNode,
    module_ids: Vec<String>,
    blank: Arc<ExportMessage>,
    env: Environment,
    status: GlobalStatus,
    sched: BTreeMap<DeviceId, SchedulerState>,
    mobility: BTreeMap<DeviceId, MobilityState>,
    phases: BTreeMap<DeviceId, f64>,
    params: SimParams,
    queue: BinaryHeap<Queued>,
    next_seq: u64,
    now: f64,
    /// Latencies and clock phases.
    rng: ChaCha8Rng,
    /// Mobility only, so walks do not depend on how many messages were sent.
    walk_rng: ChaCha8Rng,
    sent: BTreeMap<DeviceId, u64>,
    /// (holder, sender) -> (sequence number, time) of the installed message
    installed: BTreeMap<(DeviceId, DeviceId), (u64, f64)>,
    pending: BTreeMap<(DeviceId, DeviceId), PendingExpiry>,
    /// (receiver, sender) pairs where the receiver holds or is about to
    /// receive the sender's current export.
    synced: BTreeSet<(DeviceId, DeviceId)>,
    /// Static plus platform sensors per device, valid until the environment changes.
    sensor_cache: BTreeMap<DeviceId, Arc<SensorState>>,
    next_token: u64,
    env_steps: u64,
    stats: SimStats,
}

impl Simulation {
    pub fn new(
        tree: ProgramNode,
        env: Environment,
        mobility: BTreeMap<DeviceId, MobilityState>,
        params: SimParams,
        rng: ChaCha8Rng,
    ) -> Result<Self, SimError> {
        tree.validate().map_err(SimError::InvalidTree)?;
        if !check_well_formed(&env) {
            return Err(SimError::IllFormedEnvironment);
        }
        if let Some(d) = mobility.keys().find(|d| !env.sensor_field.contains_key(d)) {
            return Err(SimError::UnknownDevice(*d));
        }
        if !(params.env_step > 0.0 && params.radius > 0.0 && params.retention >= 0.0) {
            return Err(SimError::InvalidParameter(
                "environment step, radius and retention must be positive".into(),
            ));
        }
        let blank = Arc::new(ExportMessage::default_for(&tree));
        let module_ids = tree.module_ids().into_iter().map(str::to_owned).collect();
        let mut sim = Self {
            module_ids,
            blank,
            status: GlobalStatus::new(),
            sched: BTreeMap::new(),
            mobility,
            phases: BTreeMap::new(),
            queue: BinaryHeap::new(),
            next_seq: 0,
            now: 0.0,
            walk_rng: {
                let mut w = rng.clone();
                w.set_stream(rng.get_stream().wrapping_add(1));
                w
            },
            rng,
            sent: BTreeMap::new(),
            installed: BTreeMap::new(),
            pending: BTreeMap::new(),
            synced: BTreeSet::new(),
            sensor_cache: BTreeMap::new(),
            next_token: 0,
            env_steps: 0,
            stats: SimStats::default(),
            tree,
            env: Environment::default(),
            params,
        };
        let devices: Vec<DeviceId> = env.devices().collect();
        let topology = env.topology.clone();
        sim.env = env;
        for d in devices {
            sim.join(d, &topology[&d]);
            if let Timing::Reactive { boot } = &sim.params.timing {
                let trigger = boot.clone();
                sim.push(0.0, EventKind::Fire { device: d, trigger });
            }
        }
        if sim.mobility.values().any(MobilityState::is_mobile) {
            sim.push(sim.params.env_step, EventKind::EnvStep);
        }
        Ok(sim)
    }

    fn join(&mut self, device: DeviceId, nbrs: &std::collections::BTreeSet<DeviceId>) {
        self.sched.insert(device, SchedulerState::new(&self.tree));
        self.status.insert(
            device,
            nbrs.iter().map(|n| (*n, Arc::clone(&self.blank))).collect(),
        );
        self.sent.insert(device, 0);
        if let Timing::Clock { period } = self.params.timing {
            let phase = self.rng.gen::<f64>() * period;
            let k = if self.now > phase {
                ((self.now - phase) / period).ceil() as u64
            } else {
                0
            };
            self.phases.insert(device, phase);
            self.push(phase + k as f64 * period, EventKind::Tick { device, k });
        }
    }

    fn push(&mut self, time: f64, kind: EventKind) {
        self.queue.push(Queued {
            time,
            seq: self.next_seq,
            kind: Box::new(kind),
        });
        self.next_seq += 1;
    }

    /// Schedules an event at an absolute time (not before now).
    pub fn schedule(&mut self, time: f64, kind: EventKind) {
        self.push(time.max(self.now), kind);
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn status(&self) -> &GlobalStatus {
        &self.status
    }

    pub fn tree(&self) -> &ProgramNode {
        &self.tree
    }

    pub fn stats(&self) -> SimStats {
        self.stats
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    pub fn mobility(&self, device: DeviceId) -> Option<&MobilityState> {
        self.mobility.get(&device)
    }

    /// The device's latest own export.
    pub fn export_of(&self, device: DeviceId) -> Option<&Arc<ExportMessage>> {
        self.status.get(&device)?.get(&device)
    }

    /// Current root output of the device (`None` before its first execution).
    pub fn root_value(&self, device: DeviceId) -> Option<&Value> {
        self.export_of(device)?.root()
    }

    /// Root executions of every device, in id order.
    pub fn root_rounds(&self) -> Vec<(DeviceId, u64)> {
        self.sched
            .iter()
            .map(|(d, s)| (*d, s.root_executions()))
            .collect()
    }

    pub fn executions(&self, device: DeviceId, module: &str) -> Option<u64> {
        self.sched.get(&device)?.executions(module)
    }

    /// Fires `device` now with `trigger`: evaluate the application
    /// tree, install the export locally at once and send it to every other
    /// neighbour with an independent latency. An export identical to the
    /// previous one only goes to neighbours that do not hold it yet.
    pub fn fire(&mut self, device: DeviceId, trigger: Trigger) -> Result<(), SimError> {
        let layer = match self.sensor_cache.get(&device) {
            Some(l) => Arc::clone(l),
            None => {
                let base = self
                    .env
                    .sensor_field
                    .get(&device)
                    .ok_or(SimError::UnknownDevice(device))?;
                let mut s = base.clone();
                s.extend_from(&platform_sensors(&self.env, device, self.now));
                let l = Arc::new(s);
                self.sensor_cache.insert(device, Arc::clone(&l));
                l
            }
        };
        let sensors = SensorState::layered(layer)
            .with(TIME, self.now)
            .with_trigger(trigger);
        let status = self
            .status
            .get_mut(&device)
            .expect("status domain equals sensor domain");
        let state = self
            .sched
            .get_mut(&device)
            .expect("scheduler domain equals sensor domain");
        let message = evaluate_shaped(device, &self.tree, state, status, &sensors, &self.blank)
            .map_err(|source| SimError::Schedule { device, source })?;
        let unchanged = status
            .get(&device)
            .is_some_and(|prev| Arc::ptr_eq(prev, &message) || **prev == *message);
        status.insert(device, Arc::clone(&message));
        let seq = {
            let s = self
                .sent
                .get_mut(&device)
                .expect("sent domain equals sensor domain");
            *s += 1;
            *s
        };
        self.installed.insert((device, device), (seq, self.now));
        self.stats.fires += 1;
        let synced = &self.synced;
        let nbrs: Vec<DeviceId> = self.env.topology[&device]
            .iter()
            .copied()
            .filter(|n| *n != device && !(unchanged && synced.contains(&(*n, device))))
            .collect();
        for to in nbrs {
            self.synced.insert((to, device));
            let at = self.now + self.params.latency.sample(&mut self.rng);
            self.push(
                at,
                EventKind::Deliver {
                    to,
                    from: device,
                    message: Arc::clone(&message),
                    seq,
                },
            );
        }
        Ok(())
    }

    fn deliver(&mut self, to: DeviceId, from: DeviceId, message: Arc<ExportMessage>, seq: u64) {
        let connected = self
            .env
            .topology
            .get(&to)
            .is_some_and(|n| n.contains(&from));
        if !connected {
            return;
        }
        if self
            .installed
            .get(&(to, from))
            .is_some_and(|(last, _)| *last >= seq)
        {
            return;
        }
        let holder = self
            .status
            .get_mut(&to)
            .expect("connected devices have status");
        let old = holder
            .insert(from, Arc::clone(&message))
            .unwrap_or_else(|| Arc::clone(&self.blank));
        self.installed.insert((to, from), (seq, self.now));
        self.stats.deliveries += 1;
        for i in old.changed_roots(&message) {
            let trigger = Trigger::received(&self.module_ids[i], from);
            self.push(
                self.now,
                EventKind::Fire {
                    device: to,
                    trigger,
                },
            );
        }
    }

    /// Replaces the environment. Status fields are restricted to
    /// the new neighbourhoods, new neighbours start from the empty message,
    /// departed neighbours' messages are scheduled to time out, and devices
    /// are notified of position and neighbourhood changes.
    pub fn apply_environment_change(&mut self, new_env: Environment) -> Result<(), SimError> {
        if !check_well_formed(&new_env) {
            return Err(SimError::IllFormedEnvironment);
        }
        self.stats.env_changes += 1;
        self.sensor_cache.clear();
        let old = std::mem::replace(&mut self.env, new_env);
        let gone: Vec<DeviceId> = old
            .devices()
            .filter(|d| !self.env.sensor_field.contains_key(d))
            .collect();
        for d in gone {
            self.status.remove(&d);
            self.sched.remove(&d);
            self.mobility.remove(&d);
            self.phases.remove(&d);
            self.sent.remove(&d);
            // a later device reusing the id restarts its sequence numbers
            self.installed
                .retain(|(holder, sender), _| *holder != d && *sender != d);
            self.pending.retain(|(holder, _), _| *holder != d);
            self.synced.retain(|(to, from)| *to != d && *from != d);
        }
        let devices: Vec<DeviceId> = self.env.devices().collect();
        for d in devices {
            let new_nbrs = self.env.topology[&d].clone();
            let Some(old_nbrs) = old.topology.get(&d) else {
                self.join(d, &new_nbrs);
                self.push(
                    self.now,
                    EventKind::Fire {
                        device: d,
                        trigger: Trigger::sensor(NEIGHBOURS),
                    },
                );
                continue;
            };
            if old.positions.get(&d) != self.env.positions.get(&d) {
                self.push(
                    self.now,
                    EventKind::Fire {
                        device: d,
                        trigger: Trigger::sensor(POSITION),
                    },
                );
            }
            if *old_nbrs == new_nbrs {
                continue;
            }
            for n in old_nbrs.difference(&new_nbrs).copied().collect::<Vec<_>>() {
                self.depart(d, n);
            }
            for n in new_nbrs.difference(old_nbrs) {
                self.pending.remove(&(d, *n));
                self.synced.remove(&(d, *n));
                let blank = Arc::clone(&self.blank);
                self.status
                    .get_mut(&d)
                    .expect("known device")
                    .insert(*n, blank);
            }
            self.push(
                self.now,
                EventKind::Fire {
                    device: d,
                    trigger: Trigger::sensor(NEIGHBOURS),
                },
            );
        }
        Ok(())
    }

    fn depart(&mut self, holder: DeviceId, sender: DeviceId) {
        self.synced.remove(&(holder, sender));
        let Some(msg) = self.status.get_mut(&holder).and_then(|s| s.remove(&sender)) else {
            return;
        };
        let modules: Vec<String> = msg
            .roots_preorder()
            .into_iter()
            .zip(&self.module_ids)
            .filter(|(root, _)| root.is_some())
            .map(|(_, m)| m.clone())
            .collect();
        if modules.is_empty() {
            return;
        }
        let last = self
            .installed
            .get(&(holder, sender))
            .map_or(self.now, |(_, t)| *t);
        let deadline = self.now.max(last + self.params.retention);
        let token = self.next_token;
        self.next_token += 1;
        self.pending.insert(
            (holder, sender),
            PendingExpiry {
                token,
                deadline,
                modules,
            },
        );
        self.push(
            deadline,
            EventKind::Expire {
                holder,
                sender,
                token,
            },
        );
    }

    /// Raises the timeouts of a departed sender's messages at `holder` if its
    /// retention deadline has passed. Returns the number of timeouts raised.
    pub fn expire_messages(&mut self, holder: DeviceId, sender: DeviceId) -> usize {
        match self.pending.get(&(holder, sender)) {
            Some(p) if p.deadline <= self.now => {
                let token = p.token;
                self.expire(holder, sender, token)
            }
            _ => 0,
        }
    }

    fn expire(&mut self, holder: DeviceId, sender: DeviceId, token: u64) -> usize {
        if self
            .pending
            .get(&(holder, sender))
            .is_none_or(|p| p.token != token)
        {
            return 0;
        }
        let p = self
            .pending
            .remove(&(holder, sender))
            .expect("checked above");
        let n = p.modules.len();
        for module in p.modules {
            self.push(
                self.now,
                EventKind::Fire {
                    device: holder,
                    trigger: Trigger::timeout(&module, sender),
                },
            );
        }
        self.stats.timeouts += n as u64;
        n
    }

    fn env_step(&mut self) -> Result<(), SimError> {
        self.env_steps += 1;
        let dt = self.params.env_step;
        let mut positions = self.env.positions.clone();
        let mut moved = false;
        for (d, m) in self.mobility.iter_mut() {
            if !m.is_mobile() {
                continue;
            }
            let Some(p) = positions.get(d).copied() else {
                continue;
            };
            let q = m.advance(&mut self.walk_rng, p, dt);
            if q != p {
                positions.insert(*d, q);
                moved = true;
            }
        }
        if moved {
            let topology = recompute_topology(&positions, self.params.radius);
            let sensor_field = std::mem::take(&mut self.env.sensor_field);
            self.apply_environment_change(Environment {
                topology,
                sensor_field,
                positions,
            })?;
        }
        self.push((self.env_steps + 1) as f64 * dt, EventKind::EnvStep);
        Ok(())
    }

    /// Time of the next pending event.
    pub fn peek_time(&self) -> Option<f64> {
        self.queue.peek().map(|q| q.time)
    }

    /// Processes the next event.
    pub fn step(&mut self) -> Result<Option<Transition>, SimError> {
        let Some(Queued { time, kind, .. }) = self.queue.pop() else {
            return Ok(None);
        };
        self.now = self.now.max(time);
        match kind.as_ref() {
            EventKind::Fire { device, trigger } => {
                if self.env.sensor_field.contains_key(device) {
                    self.fire(*device, trigger.clone())?;
                }
            }
            EventKind::Deliver {
                to,
                from,
                message,
                seq,
            } => self.deliver(*to, *from, Arc::clone(message), *seq),
            EventKind::Expire {
                holder,
                sender,
                token,
            } => {
                self.expire(*holder, *sender, *token);
            }
            EventKind::EnvStep => self.env_step()?,
            EventKind::Tick { device, k } => {
                if let (Some(phase), Timing::Clock { period }) =
                    (self.phases.get(device).copied(), &self.params.timing)
                {
                    let next = phase + (*k + 1) as f64 * period;
                    self.fire(*device, Trigger::tick(CLOCK_TIMER))?;
                    self.push(
                        next,
                        EventKind::Tick {
                            device: *device,
                            k: k + 1,
                        },
                    );
                }
            }
        }
        Ok(Some(Transition { time, kind: *kind }))
    }

    /// Processes every event with time at most `t_end`, then advances the clock to `t_end`.
    pub fn run(&mut self, t_end: f64) -> Result<(), SimError> {
        while self.peek_time().is_some_and(|t| t <= t_end) {
            self.step()?;
        }
        self.now = self.now.max(t_end);
        Ok(())
    }

    /// Structural invariants of the configuration: a well-formed environment,
    /// status fields covering exactly each neighbourhood with tree-shaped
    /// messages, and scheduler state for every device.
    pub fn check_invariants(&self) -> Result<(), String> {
        if !check_well_formed(&self.env) {
            return Err("environment is not well formed".into());
        }
        if self.status.len() != self.env.topology.len()
            || self.sched.len() != self.env.topology.len()
        {
            return Err("status or scheduler domain differs from the device set".into());
        }
        for (d, nbrs) in &self.env.topology {
            let status: &LocalStatusField = self
                .status
                .get(d)
                .ok_or_else(|| format!("{d} has no status"))?;
            if !status.keys().eq(nbrs.iter()) {
                return Err(format!(
                    "status of {d} does not cover exactly its neighbourhood"
                ));
            }
            if let Some((n, _)) = status.iter().find(|(_, m)| !m.matches_shape(&self.tree)) {
                return Err(format!("status of {d} holds a malformed message from {n}"));
            }
        }
        Ok(())
    }
}
