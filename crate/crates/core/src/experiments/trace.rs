//! CSV traces: one row per metrics sample, tagged with the run configuration.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{ExperimentError, MetricsRow, ScenarioSpec};

pub const TRACE_HEADER: &str =
    "time,scenario,algorithm,epsilon,lambda_inv,speed,seed,mean_error,mean_rounds,stdev_rounds,efficiency";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub time: f64,
    pub scenario: &'static str,
    pub algorithm: &'static str,
    pub epsilon: f64,
    pub lambda_inv: f64,
    pub speed: f64,
    pub seed: u64,
    pub mean_error: f64,
    pub mean_rounds: f64,
    pub stdev_rounds: f64,
    pub efficiency: f64,
}

pub fn trace_records(spec: &ScenarioSpec, rows: &[MetricsRow]) -> Vec<TraceRecord> {
    rows.iter()
        .map(|r| TraceRecord {
            time: r.time,
            scenario: spec.kind.as_str(),
            algorithm: spec.algorithm.as_str(),
            epsilon: spec.epsilon,
            lambda_inv: spec.mean_latency,
            speed: spec.speed,
            seed: spec.seed,
            mean_error: r.mean_error,
            mean_rounds: r.mean_rounds,
            stdev_rounds: r.stdev_rounds,
            efficiency: r.efficiency,
        })
        .collect()
}

fn encode(records: &[TraceRecord], with_header: bool) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    if with_header {
        w.write_record(TRACE_HEADER.split(','))?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

/// Appends `records` to the CSV at `path`, writing the header when the file
/// is new or empty. Readers never observe a partial write: the whole new
/// content goes to a sibling file that is then renamed over `path`.
pub fn write_trace(path: &Path, records: &[TraceRecord]) -> Result<(), ExperimentError> {
    let io = |source| ExperimentError::Io {
        path: path.to_owned(),
        source,
    };
    let mut content = match fs::read(path) {
        Ok(bytes) => bytes,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(io(e)),
    };
    let body = encode(records, content.is_empty()).map_err(|source| ExperimentError::Csv {
        path: path.to_owned(),
        source,
    })?;
    content.extend(body);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, &content).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}
