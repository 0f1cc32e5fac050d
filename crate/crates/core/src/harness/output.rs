use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::curve::ExceedanceCurve;
use super::experiment::{BenchmarkTable, RunFailure, RunRecord, SweepResult};
use crate::detector::DeviationReport;
use crate::error::Result;

/// Written next to every set of outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub started: String,
    pub elapsed_ms: u64,
    pub failures: Vec<RunFailure>,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64, started: DateTime<Utc>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            seed,
            started: started.to_rfc3339_opts(SecondsFormat::Millis, true),
            elapsed_ms: 0,
            failures: Vec::new(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

pub fn write_curve_csv(path: &Path, curve: &ExceedanceCurve) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["threshold", "probability"])?;
    for (t, p) in curve.points() {
        w.write_record([t.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_runs_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["n", "run", "c", "d", "decision", "ill_conditioned", "js_beta", "js_nu", "js_decision"])?;
    for r in records {
        let (beta, nu, js_decision) = match &r.js {
            Some(f) => (f.beta_star.to_string(), f.nu_star.to_string(), format!("{:?}", f.decision)),
            None => Default::default(),
        };
        w.write_record([
            r.n.to_string(),
            r.run.to_string(),
            r.c.to_string(),
            r.d.to_string(),
            format!("{:?}", r.decision),
            r.ill_conditioned.to_string(),
            beta,
            nu,
            js_decision,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_benchmark_csv(path: &Path, table: &BenchmarkTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in &table.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, sweep: &SweepResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in &sweep.points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_reports_csv(path: &Path, reports: &[DeviationReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["repeat", "d_hat", "gamma", "decision", "n", "L", "condition_number", "normalized"])?;
    for (i, r) in reports.iter().enumerate() {
        w.write_record([
            i.to_string(),
            r.d_hat.to_string(),
            r.gamma.to_string(),
            format!("{:?}", r.decision),
            r.n.to_string(),
            r.samples.to_string(),
            r.condition_number.to_string(),
            r.normalized.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
