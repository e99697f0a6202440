//! Sweep configuration: value lists for every independent variable plus run
//! settings, read from TOML.
//!
//! ```toml
//! [variables]
//! scenario = ["gradient", "moving", "channel"]
//! algorithm = ["classic", "time_fluid"]
//! lambda_inv = [0.01, 0.1, 1.0]      # mean message latency, s
//! epsilon = [0.0, 0.01, 1.0]         # tolerance, m
//! speed = [0.0, 1.0]                 # m/s
//!
//! [run]
//! seeds = { start = 0, count = 10 }
//! duration = 150.0                   # s
//! scale = "desk"                     # or "full"
//! master_seed = 0
//! channel_width = 5.0                # m
//! output = "out"
//! parallel = 4
//! ```

use std::ops::Range;
use std::path::PathBuf;

use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

use timefluid::experiments::{Algorithm, GridScale, ScenarioKind, ScenarioSpec};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("line {line}: {message}")]
    Domain { line: usize, message: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    variables: RawVariables,
    #[serde(default)]
    run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariables {
    scenario: Spanned<Vec<String>>,
    algorithm: Spanned<Vec<String>>,
    lambda_inv: Spanned<Vec<f64>>,
    epsilon: Spanned<Vec<f64>>,
    speed: Spanned<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeeds {
    start: u64,
    count: u64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    seeds: Option<Spanned<RawSeeds>>,
    duration: Option<Spanned<f64>>,
    scale: Option<Spanned<String>>,
    master_seed: Option<u64>,
    channel_width: Option<Spanned<f64>>,
    output: Option<PathBuf>,
    parallel: Option<Spanned<usize>>,
}

/// A validated sweep: every combination of the value lists, for every seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub scenarios: Vec<ScenarioKind>,
    pub algorithms: Vec<Algorithm>,
    pub lambda_inv: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub speed: Vec<f64>,
    pub seeds: Range<u64>,
    pub duration: f64,
    pub scale: GridScale,
    pub master_seed: u64,
    pub channel_width: f64,
    pub output: PathBuf,
    pub parallel: usize,
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    1 + text[..span.start.min(text.len())].matches('\n').count()
}

/// Parses and validates a sweep configuration.
pub fn parse_config(text: &str) -> Result<SweepConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let fail = |span: Range<usize>, message: String| ConfigError::Domain {
        line: line_of(text, span),
        message,
    };

    fn names<T: std::str::FromStr<Err = timefluid::experiments::ExperimentError> + Ord>(
        list: &Spanned<Vec<String>>,
        key: &str,
        fail: &dyn Fn(Range<usize>, String) -> ConfigError,
    ) -> Result<Vec<T>, ConfigError> {
        if list.get_ref().is_empty() {
            return Err(fail(list.span(), format!("`{key}` must not be empty")));
        }
        let mut out = list
            .get_ref()
            .iter()
            .map(|s| s.parse::<T>().map_err(|e| fail(list.span(), e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        out.sort();
        out.dedup();
        Ok(out)
    }
    fn numbers(
        list: &Spanned<Vec<f64>>,
        key: &str,
        positive: bool,
        fail: &dyn Fn(Range<usize>, String) -> ConfigError,
    ) -> Result<Vec<f64>, ConfigError> {
        let values = list.get_ref();
        if values.is_empty() {
            return Err(fail(list.span(), format!("`{key}` must not be empty")));
        }
        if let Some(v) = values
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || (positive && **v == 0.0))
        {
            let need = if positive { "positive" } else { "non-negative" };
            return Err(fail(
                list.span(),
                format!("`{key}` values must be {need}, got {v}"),
            ));
        }
        let mut out = values.clone();
        out.sort_by(f64::total_cmp);
        out.dedup();
        Ok(out)
    }

    let v = &raw.variables;
    let scenarios = names::<ScenarioKind>(&v.scenario, "scenario", &fail)?;
    let algorithms = names::<Algorithm>(&v.algorithm, "algorithm", &fail)?;
    let lambda_inv = numbers(&v.lambda_inv, "lambda_inv", true, &fail)?;
    let epsilon = numbers(&v.epsilon, "epsilon", false, &fail)?;
    let speed = numbers(&v.speed, "speed", false, &fail)?;

    let r = raw.run;
    let seeds = match &r.seeds {
        None => 0..10,
        Some(s) => {
            let RawSeeds { start, count } = *s.get_ref();
            if count == 0 {
                return Err(fail(s.span(), "`seeds.count` must be at least 1".into()));
            }
            let end = start
                .checked_add(count)
                .ok_or_else(|| fail(s.span(), "seed range overflows".into()))?;
            start..end
        }
    };
    let duration = match &r.duration {
        None => 150.0,
        Some(d) if d.get_ref().is_finite() && *d.get_ref() > 0.0 => *d.get_ref(),
        Some(d) => {
            return Err(fail(
                d.span(),
                format!("`duration` must be positive, got {}", d.get_ref()),
            ))
        }
    };
    let scale = match &r.scale {
        None => GridScale::Desk,
        Some(s) => s
            .get_ref()
            .parse()
            .map_err(|e: timefluid::experiments::ExperimentError| fail(s.span(), e.to_string()))?,
    };
    let channel_width = match &r.channel_width {
        None => timefluid::blocks::DEFAULT_CHANNEL_WIDTH,
        Some(w) if w.get_ref().is_finite() && *w.get_ref() >= 0.0 => *w.get_ref(),
        Some(w) => {
            return Err(fail(
                w.span(),
                format!("`channel_width` must be non-negative, got {}", w.get_ref()),
            ))
        }
    };
    let parallel = match &r.parallel {
        None => 1,
        Some(p) if *p.get_ref() >= 1 => *p.get_ref(),
        Some(p) => return Err(fail(p.span(), "`parallel` must be at least 1".into())),
    };
    Ok(SweepConfig {
        scenarios,
        algorithms,
        lambda_inv,
        epsilon,
        speed,
        seeds,
        duration,
        scale,
        master_seed: r.master_seed.unwrap_or(0),
        channel_width,
        output: r.output.unwrap_or_else(|| PathBuf::from("out")),
        parallel,
    })
}

impl SweepConfig {
    /// Number of parameter cells, seeds excluded.
    pub fn cell_count(&self) -> usize {
        self.scenarios.len()
            * self.algorithms.len()
            * self.lambda_inv.len()
            * self.epsilon.len()
            * self.speed.len()
    }

    /// Every run, in merge order.
    pub fn expand(&self) -> Vec<ScenarioSpec> {
        let mut out = Vec::with_capacity(self.cell_count() * self.seeds.clone().count());
        for &kind in &self.scenarios {
            for &algorithm in &self.algorithms {
                for &mean_latency in &self.lambda_inv {
                    for &epsilon in &self.epsilon {
                        for &speed in &self.speed {
                            for seed in self.seeds.clone() {
                                out.push(ScenarioSpec {
                                    kind,
                                    speed,
                                    epsilon,
                                    mean_latency,
                                    algorithm,
                                    seed,
                                    duration: self.duration,
                                    scale: self.scale,
                                    master_seed: self.master_seed,
                                    channel_width: self.channel_width,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Built-in small sweep over every scenario and both algorithms.
    pub fn quick() -> Self {
        Self {
            scenarios: ScenarioKind::ALL.to_vec(),
            algorithms: Algorithm::ALL.to_vec(),
            lambda_inv: vec![0.1],
            epsilon: vec![0.1],
            speed: vec![1.0],
            seeds: 0..3,
            duration: 60.0,
            scale: GridScale::Desk,
            master_seed: 0,
            channel_width: timefluid::blocks::DEFAULT_CHANNEL_WIDTH,
            output: PathBuf::from("out"),
            parallel: 1,
        }
    }

    /// Shrinks this sweep to desk scale: at most 3 seeds and 60 s.
    pub fn quicken(&mut self) {
        self.scale = GridScale::Desk;
        self.seeds = self.seeds.start..self.seeds.end.min(self.seeds.start + 3);
        self.duration = self.duration.min(60.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
[variables]
scenario = ["gradient", "moving", "channel"]
algorithm = ["classic", "time_fluid"]
lambda_inv = [0.01, 0.03, 0.1, 0.3, 1]
epsilon = [0, 0.01, 0.03, 0.1, 0.3, 1, 3]
speed = [0, 0.01, 0.03, 0.1, 0.3, 1, 3]
"#;

    #[test]
    fn full_grid_cell_count() {
        let c = parse_config(FULL).unwrap();
        assert_eq!(c.cell_count(), 5 * 7 * 7 * 2 * 3);
        assert_eq!(c.expand().len(), 14700);
        assert_eq!(c.seeds, 0..10);
    }

    #[test]
    fn single_cell_one_run_per_seed() {
        let text = r#"
[variables]
scenario = ["gradient"]
algorithm = ["classic"]
lambda_inv = [0.1]
epsilon = [0.01]
speed = [1]
[run]
seeds = { start = 5, count = 3 }
"#;
        let runs = parse_config(text).unwrap().expand();
        assert_eq!(
            runs.iter().map(|r| r.seed).collect::<Vec<_>>(),
            vec![5, 6, 7]
        );
    }

    #[test]
    fn empty_list_rejected_with_line() {
        let text = FULL.replace("epsilon = [0, 0.01, 0.03, 0.1, 0.3, 1, 3]", "epsilon = []");
        match parse_config(&text) {
            Err(ConfigError::Domain { line, message }) => {
                assert_eq!(line, 6);
                assert!(message.contains("epsilon"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_latency_rejected() {
        let text = FULL.replace("0.01, 0.03, 0.1, 0.3, 1]", "-0.1]");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::Domain { line: 5, .. })
        ));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{FULL}\n[run]\nturbo = true\n");
        let err = parse_config(&text).unwrap_err();
        assert!(
            matches!(&err, ConfigError::Parse(m) if m.contains("turbo") && m.contains("line")),
            "{err}"
        );
    }

    #[test]
    fn unknown_scenario_rejected() {
        let text = FULL.replace("\"channel\"]", "\"spiral\"]");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::Domain { line: 3, .. })
        ));
    }

    #[test]
    fn quicken_caps_cost() {
        let mut c = parse_config(FULL).unwrap();
        c.scale = GridScale::Full;
        c.quicken();
        assert_eq!(
            (c.scale, c.seeds.clone(), c.duration),
            (GridScale::Desk, 0..3, 60.0)
        );
    }
}
