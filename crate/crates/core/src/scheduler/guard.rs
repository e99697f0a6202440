use std::fmt;

use crate::calculus::{SensorState, Value};
use crate::trigger::{PatternError, Trigger, TriggerPattern};

use super::ScheduleError;

/// Sensor carrying the platform clock, in seconds.
pub const TIME: &str = "time";
/// Sensor carrying the device position as a `(x, y)` tuple.
pub const POSITION: &str = "position";

/// Slack allowed when comparing floating timestamps against a period.
const TIME_TOLERANCE: f64 = 1e-9;

/// Everything a scheduling predicate may look at, besides local sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerInputs {
    pub trigger: Trigger,
    /// Root of the node's own previous tree; `None` before its first execution.
    pub prev_self_root: Option<Value>,
    /// Fresh roots of the children, computed earlier in this round.
    pub child_roots: Vec<Option<Value>>,
    /// `child_changed[i]` iff child `i`'s root differs from the one seen at
    /// this predicate's previous evaluation.
    pub child_changed: Vec<bool>,
}

/// A local scheduling predicate.
///
/// Implementations may keep private state (last firing time, last accepted
/// position); every device gets its own copy through [`Guard::box_clone`].
pub trait Guard: Send + Sync {
    fn decide(&mut self, inputs: &SchedulerInputs, sensors: &SensorState) -> bool;
    fn box_clone(&self) -> Box<dyn Guard>;
}

/// Owned, clonable scheduling predicate.
pub struct SchedulingPredicate(Box<dyn Guard>);

impl Clone for SchedulingPredicate {
    fn clone(&self) -> Self {
        Self(self.0.box_clone())
    }
}

impl fmt::Debug for SchedulingPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SchedulingPredicate")
    }
}

impl SchedulingPredicate {
    pub fn new(guard: impl Guard + 'static) -> Self {
        Self(Box::new(guard))
    }

    pub fn decide(&mut self, inputs: &SchedulerInputs, sensors: &SensorState) -> bool {
        self.0.decide(inputs, sensors)
    }

    /// Disjunction; both sides are evaluated every time so that stateful
    /// guards observe every round.
    pub fn or(self, other: SchedulingPredicate) -> SchedulingPredicate {
        SchedulingPredicate::new(Or(self, other))
    }
}

#[derive(Clone)]
struct FnGuard<F>(F);

impl<F> Guard for FnGuard<F>
where
    F: FnMut(&SchedulerInputs, &SensorState) -> bool + Clone + Send + Sync + 'static,
{
    fn decide(&mut self, inputs: &SchedulerInputs, sensors: &SensorState) -> bool {
        (self.0)(inputs, sensors)
    }
    fn box_clone(&self) -> Box<dyn Guard> {
        Box::new(self.clone())
    }
}

/// Predicate from a closure; captured state is cloned per device.
pub fn from_fn<F>(f: F) -> SchedulingPredicate
where
    F: FnMut(&SchedulerInputs, &SensorState) -> bool + Clone + Send + Sync + 'static,
{
    SchedulingPredicate::new(FnGuard(f))
}

#[derive(Clone)]
struct Or(SchedulingPredicate, SchedulingPredicate);

impl Guard for Or {
    fn decide(&mut self, inputs: &SchedulerInputs, sensors: &SensorState) -> bool {
        let a = self.0.decide(inputs, sensors);
        let b = self.1.decide(inputs, sensors);
        a || b
    }
    fn box_clone(&self) -> Box<dyn Guard> {
        Box::new(self.clone())
    }
}

pub fn always() -> SchedulingPredicate {
    from_fn(|_, _| true)
}

pub fn never() -> SchedulingPredicate {
    from_fn(|_, _| false)
}

/// True until the node has produced its first tree.
pub fn first_run() -> SchedulingPredicate {
    from_fn(|inputs, _| inputs.prev_self_root.is_none())
}

pub fn any_child_changed() -> SchedulingPredicate {
    from_fn(|inputs, _| inputs.child_changed.iter().any(|c| *c))
}

/// True iff child `index` currently outputs boolean `true`.
pub fn child_true(index: usize) -> SchedulingPredicate {
    from_fn(move |inputs, _| matches!(inputs.child_roots.get(index), Some(Some(Value::Bool(true)))))
}

#[derive(Clone)]
struct Timer {
    period: f64,
    last: Option<f64>,
}

impl Guard for Timer {
    fn decide(&mut self, _: &SchedulerInputs, sensors: &SensorState) -> bool {
        let Some(now) = sensors.get(TIME).and_then(|v| v.as_number().ok()) else {
            return false;
        };
        let due = self
            .last
            .is_none_or(|last| now - last >= self.period - TIME_TOLERANCE);
        if due {
            self.last = Some(now);
        }
        due
    }
    fn box_clone(&self) -> Box<dyn Guard> {
        Box::new(self.clone())
    }
}

/// True iff at least `period` seconds of platform time elapsed since the
/// last true result (or it never fired).
pub fn timer(period: f64) -> Result<SchedulingPredicate, ScheduleError> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(ScheduleError::InvalidGuard(format!(
            "timer period must be positive, got {period}"
        )));
    }
    Ok(SchedulingPredicate::new(Timer { period, last: None }))
}

/// True iff the trigger matches any of `patterns`.
pub fn reactive(patterns: Vec<TriggerPattern>) -> SchedulingPredicate {
    from_fn(move |inputs, _| patterns.iter().any(|p| p.matches(&inputs.trigger)))
}

/// [`reactive`] over textual patterns such as `SENSOR(".*")`.
pub fn reactive_parsed(patterns: &[&str]) -> Result<SchedulingPredicate, PatternError> {
    let parsed = patterns
        .iter()
        .map(|p| TriggerPattern::parse(p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(reactive(parsed))
}

#[derive(Clone)]
struct Moved {
    epsilon: f64,
    last: Option<(f64, f64)>,
}

fn read_position(sensors: &SensorState) -> Option<(f64, f64)> {
    let p = sensors.get(POSITION)?;
    Some((
        p.get(0).ok()?.as_number().ok()?,
        p.get(1).ok()?.as_number().ok()?,
    ))
}

impl Guard for Moved {
    fn decide(&mut self, _: &SchedulerInputs, sensors: &SensorState) -> bool {
        let Some(pos) = read_position(sensors) else {
            return false;
        };
        let moved = match self.last {
            None => true,
            Some(last) => last != pos && (pos.0 - last.0).hypot(pos.1 - last.1) >= self.epsilon,
        };
        if moved {
            self.last = Some(pos);
        }
        moved
    }
    fn box_clone(&self) -> Box<dyn Guard> {
        Box::new(self.clone())
    }
}

/// True on the first observed position and whenever the device is at least
/// `epsilon` metres away from the position of the last true result.
pub fn moved_at_least(epsilon: f64) -> SchedulingPredicate {
    SchedulingPredicate::new(Moved {
        epsilon,
        last: None,
    })
}

/// True iff sensor `name` differs from its value at the previous evaluation.
/// The first evaluation reports no change.
pub fn sensor_changed(name: &str) -> SchedulingPredicate {
    let name = name.to_owned();
    let mut last: Option<Option<Value>> = None;
    from_fn(move |_, sensors| {
        let current = sensors.get(&name).cloned();
        let changed = last.as_ref().is_some_and(|prev| *prev != current);
        last = Some(current);
        changed
    })
}
