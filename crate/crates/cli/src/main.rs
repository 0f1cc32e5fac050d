use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use chrono::Utc;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use spectral_confound::baseline::Metric;
use spectral_confound::deviation::{closed_form, ClosedFormKind};
use spectral_confound::harness::{
    analyze_csv, run_benchmark, run_distribution, threshold_sweep, write_benchmark_csv, write_curve_csv, write_json,
    write_reports_csv, write_runs_csv, write_sweep_csv, AnalyzeOptions, BenchmarkTable, ExperimentConfig, Manifest,
    Method,
};
use spectral_confound::models::{CSpec, CoefficientFamily, NoiseKind, SpectrumSpec};
use spectral_confound::{Error, Result};

#[derive(Parser)]
#[command(name = "spectral-confound", version, about = "Detect a hidden confounder in linear models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a CSV dataset for a confounder of the features and the target.
    Detect(DetectArgs),
    /// Simulate models and record the distribution of the deviation.
    Simulate(SimulateArgs),
    /// Accuracy tables from a JSON experiment config.
    Benchmark(BenchmarkArgs),
    /// True and false positive rates over a range of thresholds.
    Sweep(SweepArgs),
    /// Closed-form asymptotic deviation for a noise spectrum family.
    Asymptotic(AsymptoticArgs),
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    target: String,
    /// Comma-separated columns to leave out.
    #[arg(long, value_delimiter = ',')]
    drop: Vec<String>,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Rows per repeat, drawn without replacement. Defaults to all rows.
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_normalize: bool,
    #[arg(long, default_value = "ours")]
    method: Method,
    #[arg(long, default_value = "euclidean")]
    metric: Metric,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Observations per run; 0 uses population covariances.
    #[arg(long, default_value_t = 0)]
    samples: usize,
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long, default_value = "zero")]
    c: CSpec,
    #[arg(long, default_value = "normal")]
    coeffs: CoefficientFamily,
    #[arg(long, default_value = "gaussian")]
    noise: NoiseKind,
    #[arg(long, default_value = "constant")]
    spectrum: SpectrumSpec,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "ours")]
    method: Method,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// `start:stop:step`
    #[arg(long, default_value = "0:1:0.02")]
    gammas: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AsymptoticArgs {
    #[arg(long)]
    kind: ClosedFormKind,
    #[arg(long)]
    c: f64,
    #[arg(long)]
    rb: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma1: f64,
}

/// A benchmark file holds one config or a list under `cases`.
#[derive(Deserialize)]
#[serde(untagged)]
enum ConfigFile {
    Cases { cases: Vec<ExperimentConfig> },
    Single(ExperimentConfig),
}

impl ConfigFile {
    fn into_cases(self) -> Vec<ExperimentConfig> {
        match self {
            Self::Cases { cases } => cases,
            Self::Single(c) => vec![c],
        }
    }
}

fn read_configs(path: &Path) -> Result<Vec<ExperimentConfig>> {
    let text = fs::read_to_string(path)?;
    let cases = serde_json::from_str::<ConfigFile>(&text)?.into_cases();
    if cases.is_empty() {
        return Err(Error::InvalidConfig("config lists no cases".into()));
    }
    Ok(cases)
}

fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidConfig(format!("expected start:stop:step, got `{spec}`"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0 && stop >= start) {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

fn prepare_out(out: &Option<PathBuf>) -> Result<Option<&Path>> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Ok(Some(dir.as_path()))
        }
        None => Ok(None),
    }
}

fn finish_manifest(dir: Option<&Path>, mut manifest: Manifest, start: Instant) -> Result<()> {
    manifest.elapsed_ms = start.elapsed().as_millis() as u64;
    if let Some(dir) = dir {
        write_json(&dir.join("manifest.json"), &manifest)?;
    }
    Ok(())
}

fn detect(args: DetectArgs) -> Result<()> {
    let (started, start) = (Utc::now(), Instant::now());
    if args.no_normalize {
        eprintln!("warning: data is not normalized; the threshold {} has no calibrated meaning", args.gamma);
    }
    let options = AnalyzeOptions {
        target: args.target.clone(),
        drop: args.drop.clone(),
        subsample: args.subsample,
        repeats: args.repeats,
        gamma: args.gamma,
        seed: args.seed,
        normalize: !args.no_normalize,
        method: args.method,
        metric: args.metric,
    };
    let result = analyze_csv(&args.input, &options)?;

    if options.method.ours() {
        if let [report] = &result.reports[..] {
            println!("{}", serde_json::to_string_pretty(report)?);
        } else {
            let flagged = result.reports.iter().filter(|r| r.decision.is_confounder()).count();
            println!(
                "{} repeats: median D = {:.6}, {flagged} flagged a confounder (gamma = {})",
                result.reports.len(),
                result.median_d().unwrap_or(f64::NAN),
                args.gamma
            );
        }
    }
    if options.method.js() {
        if let [fit] = &result.js[..] {
            println!("{}", serde_json::to_string_pretty(fit)?);
        } else {
            let flagged = result.js.iter().filter(|f| f.decision.is_confounder()).count();
            println!("baseline: {flagged} of {} repeats flagged a confounder", result.js.len());
        }
    }
    if !result.failures.is_empty() {
        eprintln!("warning: {} repeats failed", result.failures.len());
    }

    let dir = prepare_out(&args.out)?;
    if let Some(dir) = dir {
        write_reports_csv(&dir.join("reports.csv"), &result.reports)?;
        if let Some(curve) = &result.curve {
            write_curve_csv(&dir.join("curve.csv"), curve)?;
        }
        if !result.js.is_empty() {
            write_json(&dir.join("baseline.json"), &result.js)?;
        }
    }
    let mut manifest = Manifest::new(
        "detect",
        json!({"input": args.input, "options": options}),
        args.seed,
        started,
    );
    manifest.failures = result.failures;
    finish_manifest(dir, manifest, start)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let (started, start) = (Utc::now(), Instant::now());
    let config = ExperimentConfig {
        n: args.n,
        samples: args.samples,
        runs: args.runs,
        c: args.c,
        coeffs: args.coeffs,
        noise: args.noise,
        spectrum: args.spectrum,
        gamma: args.gamma,
        seed: args.seed,
        method: args.method,
        ..Default::default()
    };
    let dists = run_distribution(&config)?;
    let dir = prepare_out(&args.out)?;
    let mut manifest = Manifest::new("simulate", serde_json::to_value(&config)?, config.seed, started);
    for d in dists {
        let mut values = d.values();
        values.sort_by(f64::total_cmp);
        println!(
            "n = {}: {} runs, {} failed, median D = {:.4}, P(D >= {}) = {:.3}",
            d.n,
            d.records.len(),
            d.failures.len(),
            values[values.len() / 2],
            config.gamma,
            d.exceedance_at(config.gamma)
        );
        if let Some(dir) = dir {
            write_runs_csv(&dir.join(format!("runs_n{}.csv", d.n)), &d.records)?;
            write_curve_csv(&dir.join(format!("curve_n{}.csv", d.n)), &d.curve)?;
        }
        manifest.failures.extend(d.failures);
    }
    finish_manifest(dir, manifest, start)
}

fn benchmark(args: BenchmarkArgs) -> Result<()> {
    let (started, start) = (Utc::now(), Instant::now());
    let cases = read_configs(&args.config)?;
    let mut table = BenchmarkTable::default();
    for case in &cases {
        table.extend(run_benchmark(case)?);
    }
    println!("{:<6} {:<16} {:>5} {:>5} {:>9} {:>8}", "method", "c", "n", "L", "accuracy", "failed");
    for r in &table.rows {
        println!(
            "{:<6} {:<16} {:>5} {:>5} {:>8.1}% {:>8}",
            r.method.to_string(),
            r.c,
            r.n,
            r.samples,
            r.accuracy,
            r.failures
        );
    }
    let dir = prepare_out(&args.out)?;
    if let Some(dir) = dir {
        write_benchmark_csv(&dir.join("benchmark.csv"), &table)?;
    }
    let seed = cases[0].seed;
    let mut manifest = Manifest::new("benchmark", serde_json::to_value(&cases)?, seed, started);
    manifest.failures = table.failures;
    finish_manifest(dir, manifest, start)
}

fn sweep(args: SweepArgs) -> Result<()> {
    let (started, start) = (Utc::now(), Instant::now());
    let gammas = parse_range(&args.gammas)?;
    let cases = read_configs(&args.config)?;
    let [config] = &cases[..] else {
        return Err(Error::InvalidConfig("sweep takes a single config".into()));
    };
    let result = threshold_sweep(config, &gammas)?;
    for &n in &config.n {
        if let Some(best) = result.best_gamma(n) {
            let p = result.points.iter().find(|p| p.n == n && p.gamma == best).expect("point exists");
            println!("n = {n}: largest TPR - FPR = {:.3} at gamma = {best:.3}", p.tpr - p.fpr);
        }
    }
    let dir = prepare_out(&args.out)?;
    if let Some(dir) = dir {
        write_sweep_csv(&dir.join("sweep.csv"), &result)?;
    }
    let mut manifest = Manifest::new(
        "sweep",
        json!({"config": config, "gammas": args.gammas}),
        config.seed,
        started,
    );
    manifest.failures = result.failures;
    finish_manifest(dir, manifest, start)
}

fn asymptotic(args: AsymptoticArgs) -> Result<()> {
    if !(args.sigma1 > 0.0 && args.rb > 0.0) {
        return Err(Error::InvalidConfig("sigma1 and rb must be positive".into()));
    }
    let d = closed_form(args.kind, args.c, args.rb, args.sigma1);
    println!("asymptotic D = {d:.10}");
    if args.kind == ClosedFormKind::Exponential {
        let radius = std::f64::consts::E * args.sigma1 / 2.0;
        println!("non-identifiable r_b^2 = {radius:.10} (r_b = {:.10})", radius.sqrt());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Detect(a) => detect(a),
        Command::Simulate(a) => simulate(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Sweep(a) => sweep(a),
        Command::Asymptotic(a) => asymptotic(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
