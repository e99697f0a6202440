//! The three evaluation scenarios (gradient, moving, channel), their
//! oracles and metrics, and the CSV trace format.

mod apps;
mod metrics;
mod oracle;
mod run;
mod scenario;
mod trace;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::netsim::SimError;

pub use apps::{
    channel_tree, for_algorithm, gradient_tree, neighbour_change_counter, ChannelModules,
    GradientModules,
};
pub use metrics::{distance_error, MetricsAccumulator, MetricsRow};
pub use oracle::{oracle_channel, oracle_distance_field, shortest_paths};
pub use run::{run_scenario, sample_metrics, RunOutput};
pub use scenario::{
    build_scenario, Scenario, COMM_RADIUS, GRID_SPACING, JITTER_RADIUS, MOBILE_OFFSET, SOURCE,
};
pub use trace::{trace_records, write_trace, TraceRecord, TRACE_HEADER};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal $(| $alias:literal)*),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = ExperimentError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text $(| $alias)* => Ok($name::$variant),)+
                    other => Err(ExperimentError::InvalidSpec(format!(
                        concat!("unknown ", stringify!($name), " `{}`"), other
                    ))),
                }
            }
        }
    };
}

named_enum!(
    /// Deployment and application.
    ScenarioKind { Gradient => "gradient", Moving => "moving", Channel => "channel" }
);

named_enum!(
    /// Scheduling policy of the application tree.
    Algorithm { Classic => "classic", TimeFluid => "time_fluid" | "time-fluid" | "timefluid" }
);

named_enum!(
    /// Grid size preset: `desk` is 11x11 (22x11 for the channel), `full` 21x21 (42x21).
    GridScale { Desk => "desk", Full => "full" }
);

impl GridScale {
    /// `(columns, rows)` of the nominal grid.
    pub fn dims(self, kind: ScenarioKind) -> (usize, usize) {
        let side = match self {
            GridScale::Desk => 11,
            GridScale::Full => 21,
        };
        match kind {
            ScenarioKind::Channel => (2 * side, side),
            _ => (side, side),
        }
    }
}

/// One simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Speed of mobile devices, m/s.
    pub speed: f64,
    /// Movement/value tolerance of the time-fluid guards, m.
    pub epsilon: f64,
    /// Mean message latency, s.
    pub mean_latency: f64,
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Simulated seconds; metrics are sampled every second from 0.
    pub duration: f64,
    pub scale: GridScale,
    pub master_seed: u64,
    /// Channel width, m.
    pub channel_width: f64,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, algorithm: Algorithm) -> Self {
        Self {
            kind,
            speed: 0.0,
            epsilon: 0.01,
            mean_latency: 0.1,
            algorithm,
            seed: 0,
            duration: 150.0,
            scale: GridScale::Desk,
            master_seed: 0,
            channel_width: crate::blocks::DEFAULT_CHANNEL_WIDTH,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |what: &str, v: f64| {
            Err(ExperimentError::InvalidSpec(format!(
                "{what} out of range: {v}"
            )))
        };
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return bad("speed", self.speed);
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", self.epsilon);
        }
        if !(self.mean_latency > 0.0 && self.mean_latency.is_finite()) {
            return bad("mean latency", self.mean_latency);
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration", self.duration);
        }
        if !(self.channel_width >= 0.0 && self.channel_width.is_finite()) {
            return bad("channel width", self.channel_width);
        }
        Ok(())
    }
}

impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} eps={} lambda_inv={} speed={} seed={} duration={} scale={}",
            self.kind,
            self.algorithm,
            self.epsilon,
            self.mean_latency,
            self.speed,
            self.seed,
            self.duration,
            self.scale
        )
    }
}

/// Independent generator streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Initial positions.
    Deployment = 1,
    /// Latencies, walks and clock phases.
    Dynamics = 2,
}

/// Generator keyed by (master seed, scenario, seed, stream). Runs differing
/// only in algorithm or tunables share their deployment.
pub fn derive_rng(master_seed: u64, kind: ScenarioKind, seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&(kind as u64).to_le_bytes());
    key[16..24].copy_from_slice(&seed.to_le_bytes());
    key[24..].copy_from_slice(&(stream as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
