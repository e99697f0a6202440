//! Runs an expanded sweep on a worker pool and merges the traces.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use timefluid::experiments::{
    run_scenario, trace_records, write_trace, ExperimentError, ScenarioSpec, TraceRecord,
};

use crate::config::SweepConfig;

pub const MERGED_FILE: &str = "merged.csv";
pub const RUNS_DIR: &str = "runs";

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("run failed ({spec}): {source}")]
    Run {
        spec: Box<ScenarioSpec>,
        #[source]
        source: ExperimentError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Where the per-run CSV of `spec` goes under `out`.
pub fn run_path(out: &Path, spec: &ScenarioSpec) -> PathBuf {
    out.join(RUNS_DIR).join(format!(
        "{}_{}_lambda{}_eps{}_v{}_seed{}.csv",
        spec.kind, spec.algorithm, spec.mean_latency, spec.epsilon, spec.speed, spec.seed
    ))
}

fn merge_key(spec: &ScenarioSpec) -> impl Ord {
    (
        spec.kind,
        spec.algorithm,
        Ordered(spec.mean_latency),
        Ordered(spec.epsilon),
        Ordered(spec.speed),
        spec.seed,
    )
}

#[derive(PartialEq)]
struct Ordered(f64);
impl Eq for Ordered {}
impl PartialOrd for Ordered {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn execute(out: &Path, spec: &ScenarioSpec) -> Result<Vec<TraceRecord>, BatchError> {
    let fail = |source| BatchError::Run {
        spec: Box::new(spec.clone()),
        source,
    };
    let output = run_scenario(spec).map_err(fail)?;
    let records = trace_records(spec, &output.rows);
    let path = run_path(out, spec);
    match fs::remove_file(&path) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(source) => return Err(BatchError::Io { path, source }),
    }
    write_trace(&path, &records).map_err(fail)?;
    Ok(records)
}

/// Runs every (cell, seed) of `config` once, writing one CSV per run under
/// `<output>/runs` and, if all succeed, `<output>/merged.csv` ordered by
/// (scenario, algorithm, latency, tolerance, speed, seed, time). The merged
/// file is the same for any parallelism. Returns the merged file's path.
pub fn run_batch(config: &SweepConfig) -> Result<PathBuf, BatchError> {
    let out = &config.output;
    let runs_dir = out.join(RUNS_DIR);
    fs::create_dir_all(&runs_dir).map_err(|source| BatchError::Io {
        path: runs_dir.clone(),
        source,
    })?;
    let mut specs = config.expand();
    specs.sort_by_key(merge_key);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallel)
        .build()?;
    let results: Vec<Vec<TraceRecord>> = pool.install(|| {
        specs
            .par_iter()
            .map(|s| execute(out, s))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let merged: Vec<TraceRecord> = results.into_iter().flatten().collect();
    let path = out.join(MERGED_FILE);
    match fs::remove_file(&path) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(source) => return Err(BatchError::Io { path, source }),
    }
    write_trace(&path, &merged).map_err(|source| BatchError::Run {
        spec: Box::new(specs[0].clone()),
        source,
    })?;
    Ok(path)
}
