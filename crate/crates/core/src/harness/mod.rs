//! Experiment orchestration: exceedance curves, accuracy tables, threshold
//! sweeps and the CSV workflow, plus the files they write.
//!
//! Every run draws from its own stream (see [`stream_id`]), so results are the
//! same whether runs execute serially or in parallel.

mod config;
mod curve;
mod experiment;
mod output;
mod realdata;

pub use config::{ExperimentConfig, Method};
pub use curve::{default_thresholds, exceedance_curve, ExceedanceCurve, DEFAULT_THRESHOLD_POINTS};
pub use experiment::{
    evaluate_run, run_benchmark, run_distribution, threshold_sweep, BenchmarkRow, BenchmarkTable,
    Distribution, RunFailure, RunRecord, SweepPoint, SweepResult,
};
pub use output::{
    write_benchmark_csv, write_curve_csv, write_json, write_reports_csv, write_runs_csv, write_sweep_csv,
    Manifest,
};
pub use realdata::{analyze_csv, analyze_dataset, read_csv, AnalysisResult, AnalyzeOptions};

/// Stream id of one run. `arm` separates the confounded and unconfounded
/// generators of a sweep.
pub fn stream_id(n: usize, arm: u64, run: usize) -> u64 {
    ((n as u64) << 32) ^ (arm << 28) ^ run as u64
}
