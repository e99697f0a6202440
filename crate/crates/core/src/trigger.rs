//! Platform events that cause a round, and the patterns guards match them with.

use std::fmt;

use regex::Regex;
use thiserror::Error;

use crate::calculus::DeviceId;

/// Platform event causing a round at a device.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Trigger {
    Tick(String),
    Sensor(String),
    MessageReceived { module: String, sender: DeviceId },
    MessageTimeout { module: String, sender: DeviceId },
}

impl Trigger {
    pub fn tick(timer: &str) -> Self {
        Trigger::Tick(timer.to_owned())
    }

    pub fn sensor(name: &str) -> Self {
        Trigger::Sensor(name.to_owned())
    }

    pub fn received(module: &str, sender: DeviceId) -> Self {
        Trigger::MessageReceived {
            module: module.to_owned(),
            sender,
        }
    }

    pub fn timeout(module: &str, sender: DeviceId) -> Self {
        Trigger::MessageTimeout {
            module: module.to_owned(),
            sender,
        }
    }
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trigger::Tick(t) => write!(f, "TICK({t})"),
            Trigger::Sensor(n) => write!(f, "SENSOR({n})"),
            Trigger::MessageReceived { module, sender } => {
                write!(f, "MESSAGE_RECEIVED({module},{sender})")
            }
            Trigger::MessageTimeout { module, sender } => {
                write!(f, "MESSAGE_TIMEOUT({module},{sender})")
            }
        }
    }
}

#[derive(Debug, Error)]
#[error("malformed trigger pattern `{pattern}`: {reason}")]
pub struct PatternError {
    pub pattern: String,
    pub reason: String,
}

/// A set of triggers. Sensor names match a regular expression anchored at both ends.
#[derive(Debug, Clone)]
pub enum TriggerPattern {
    AnyTick,
    Tick(String),
    Sensor(Regex),
    MessageReceived(String),
    MessageTimeout(String),
}

impl TriggerPattern {
    pub fn sensor(regex: &str) -> Result<Self, PatternError> {
        Regex::new(&format!("^(?:{regex})$"))
            .map(TriggerPattern::Sensor)
            .map_err(|e| PatternError {
                pattern: regex.to_owned(),
                reason: e.to_string(),
            })
    }

    pub fn received(module: &str) -> Self {
        TriggerPattern::MessageReceived(module.to_owned())
    }

    pub fn timeout(module: &str) -> Self {
        TriggerPattern::MessageTimeout(module.to_owned())
    }

    /// Parses the textual form used in configuration and docs:
    /// `TICK`, `TICK(id)`, `SENSOR(regex)`, `MESSAGE_RECEIVED(module)`, `MESSAGE_TIMEOUT(module)`.
    pub fn parse(text: &str) -> Result<Self, PatternError> {
        let err = |reason: &str| PatternError {
            pattern: text.to_owned(),
            reason: reason.to_owned(),
        };
        let text = text.trim();
        if text == "TICK" {
            return Ok(TriggerPattern::AnyTick);
        }
        let open = text
            .find('(')
            .ok_or_else(|| err("expected NAME(argument)"))?;
        if !text.ends_with(')') {
            return Err(err("missing closing parenthesis"));
        }
        let arg = text[open + 1..text.len() - 1].trim().trim_matches('"');
        if arg.is_empty() {
            return Err(err("empty argument"));
        }
        match &text[..open] {
            "TICK" => Ok(TriggerPattern::Tick(arg.to_owned())),
            "SENSOR" => TriggerPattern::sensor(arg),
            "MESSAGE_RECEIVED" => Ok(TriggerPattern::received(arg)),
            "MESSAGE_TIMEOUT" => Ok(TriggerPattern::timeout(arg)),
            _ => Err(err("unknown trigger kind")),
        }
    }

    pub fn matches(&self, trigger: &Trigger) -> bool {
        match (self, trigger) {
            (TriggerPattern::AnyTick, Trigger::Tick(_)) => true,
            (TriggerPattern::Tick(id), Trigger::Tick(t)) => id == t,
            (TriggerPattern::Sensor(re), Trigger::Sensor(name)) => re.is_match(name),
            (TriggerPattern::MessageReceived(m), Trigger::MessageReceived { module, .. }) => {
                m == module
            }
            (TriggerPattern::MessageTimeout(m), Trigger::MessageTimeout { module, .. }) => {
                m == module
            }
            _ => false,
        }
    }
}
