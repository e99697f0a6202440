//! Drives one scenario run and samples its metrics every second.

use crate::netsim::{SimParams, SimStats, Simulation, Timing};
use crate::scheduler::POSITION;
use crate::trigger::Trigger;

use super::metrics::distance_error;
use super::oracle::{oracle_channel, oracle_distance_field};
use super::scenario::{build_scenario, Scenario, COMM_RADIUS};
use super::{
    derive_rng, Algorithm, ExperimentError, MetricsAccumulator, MetricsRow, ScenarioSpec, Stream,
};

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// One row per integer second from 0 to the duration.
    pub rows: Vec<MetricsRow>,
    pub stats: SimStats,
    pub devices: usize,
}

/// Per-device errors and root execution counts of the current state.
pub fn sample_metrics(scenario: &Scenario, sim: &Simulation) -> (Vec<f64>, Vec<f64>) {
    let env = sim.env();
    let errors = match scenario.endpoints {
        Some((a, b)) => oracle_channel(env, a, b, scenario.channel_width)
            .into_iter()
            .map(|(d, expected)| {
                let computed = sim
                    .root_value(d)
                    .and_then(|v| v.as_bool().ok())
                    .unwrap_or(false);
                if computed == expected {
                    0.0
                } else {
                    1.0
                }
            })
            .collect(),
        None => {
            let cap = scenario.arena.diagonal();
            oracle_distance_field(env, &scenario.sources)
                .into_iter()
                .map(|(d, expected)| {
                    let computed = sim
                        .root_value(d)
                        .and_then(|v| v.as_number().ok())
                        .unwrap_or(f64::INFINITY);
                    distance_error(computed, expected, cap)
                })
                .collect()
        }
    };
    let rounds = sim
        .root_rounds()
        .into_iter()
        .map(|(_, k)| k as f64)
        .collect();
    (errors, rounds)
}

/// Runs `spec` to completion.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<RunOutput, ExperimentError> {
    let scenario = build_scenario(spec)?;
    let timing = match spec.algorithm {
        Algorithm::TimeFluid => Timing::Reactive {
            boot: Trigger::sensor(POSITION),
        },
        Algorithm::Classic => Timing::Clock { period: 1.0 },
    };
    let mut params = SimParams::new(spec.mean_latency, timing)?;
    params.radius = COMM_RADIUS;
    let rng = derive_rng(spec.master_seed, spec.kind, spec.seed, Stream::Dynamics);
    let mut sim = Simulation::new(
        scenario.tree.clone(),
        scenario.env.clone(),
        scenario.mobility.clone(),
        params,
        rng,
    )?;
    let mut acc = MetricsAccumulator::new();
    let mut rows = Vec::new();
    let samples = spec.duration.floor() as u64;
    for k in 0..=samples {
        let t = k as f64;
        sim.run(t)?;
        let (errors, rounds) = sample_metrics(&scenario, &sim);
        rows.push(acc.sample(t, &errors, &rounds));
    }
    Ok(RunOutput {
        rows,
        stats: sim.stats(),
        devices: scenario.env.positions.len(),
    })
}
