use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, OnceLock};

use crate::trigger::Trigger;

use super::value::Value;

/// Reserved sensor name carrying the trigger of the current round.
pub const TRIGGER: &str = "trigger";

/// Local sensor state of a device.
///
/// The trigger is stored typed; reading the `trigger` sensor yields its
/// textual form. A state may sit on a shared parent layer: own entries
/// shadow the parent's.
#[derive(Debug, Clone, Default)]
pub struct SensorState {
    values: BTreeMap<String, Value>,
    parent: Option<Arc<SensorState>>,
    trigger: Option<(Trigger, OnceLock<Value>)>,
}

impl PartialEq for SensorState {
    fn eq(&self, other: &Self) -> bool {
        self.trigger() == other.trigger()
            && self.names().eq(other.names())
            && self.names().all(|n| self.get(n) == other.get(n))
    }
}

impl SensorState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Empty state reading through to `parent`.
    pub fn layered(parent: Arc<SensorState>) -> Self {
        Self {
            values: BTreeMap::new(),
            parent: Some(parent),
            trigger: None,
        }
    }

    pub fn with(mut self, name: &str, value: impl Into<Value>) -> Self {
        self.set(name, value);
        self
    }

    pub fn with_trigger(mut self, trigger: Trigger) -> Self {
        self.set_trigger(trigger);
        self
    }

    pub fn set(&mut self, name: &str, value: impl Into<Value>) {
        self.values.insert(name.to_owned(), value.into());
    }

    pub fn set_trigger(&mut self, trigger: Trigger) {
        self.trigger = Some((trigger, OnceLock::new()));
    }

    pub fn trigger(&self) -> Option<&Trigger> {
        match &self.trigger {
            Some((t, _)) => Some(t),
            None => self.parent.as_ref()?.trigger(),
        }
    }

    /// Lookup by name; `None` means absent (callers turn it into a fault).
    pub fn get(&self, name: &str) -> Option<&Value> {
        if name == TRIGGER {
            return match &self.trigger {
                Some((t, text)) => Some(text.get_or_init(|| Value::text(&t.to_string()))),
                None => self.parent.as_ref()?.get(name),
            };
        }
        self.values
            .get(name)
            .or_else(|| self.parent.as_ref()?.get(name))
    }

    /// Sensor names in ascending order, parent layers included.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        let mut all: BTreeSet<&str> = self.values.keys().map(String::as_str).collect();
        let mut layer = self.parent.as_deref();
        while let Some(l) = layer {
            all.extend(l.values.keys().map(String::as_str));
            layer = l.parent.as_deref();
        }
        all.into_iter()
    }

    /// Copies every entry of `other` over this state (trigger included, if set).
    pub fn extend_from(&mut self, other: &SensorState) {
        for name in other.names() {
            if let Some(v) = other.get(name) {
                self.values.insert(name.to_owned(), v.clone());
            }
        }
        if let Some(t) = other.trigger() {
            self.set_trigger(t.clone());
        }
    }
}
