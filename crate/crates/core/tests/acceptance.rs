//! Acceptance checks. Each check prints one `[PASS]` or `[FAIL]` line with the
//! measured quantity and its wall time; the process exits non-zero if any
//! check fails.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use spectral_confound::baseline::Metric;
use spectral_confound::detector::{detect, empirical_deviation};
use spectral_confound::deviation::{
    closed_form, deviation, finite_n_theta_terms, nonidentifiable_radius_sq_from_spectrum,
    sherman_morrison_solve, ClosedFormKind, InverseTraces,
};
use spectral_confound::harness::{
    analyze_csv, run_benchmark, run_distribution, threshold_sweep, AnalyzeOptions, ExperimentConfig, Method,
};
use spectral_confound::models::{
    build_model, population_deviation, run_rng, sample, spectrum, CSpec, ModelParams, SpectrumSpec,
};
use spectral_confound::spectral::{eigendecompose, first_moment, induced_measure, tracial_measure, SymMatrix};

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(id: &str, title: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let passed = out.passed && in_time;
    println!(
        "[{}] {id} {title}: {} ({:.2} s, budget {} s{})",
        if passed { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if in_time { "" } else { ", over budget" },
    );
    passed
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn gaussian_vec<R: Rng>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// `G Gᵀ / n + δ I` with a Gaussian `G`.
fn random_psd<R: Rng>(n: usize, ridge: f64, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * ridge
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn c1_isotropy() -> Outcome {
    let mut rng = run_rng(101, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=100);
        let s = rng.random_range(0.01..10.0);
        let phi = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let d = deviation(&phi, &SymMatrix::scaled_identity(n, s)).unwrap().value;
        worst = worst.max(d);
    }
    Outcome {
        passed: worst <= 1e-12,
        detail: format!("max D(φ, sI) = {worst:.3e} over 1000 draws (limit 1e-12)"),
    }
}

fn c2_moment_routes() -> Outcome {
    let mut rng = run_rng(102, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.random_range(1..=200);
        let m = SymMatrix::new(random_psd(n, 0.0, &mut rng)).unwrap();
        let phi = gaussian_vec(n, &mut rng);
        // Quadratic-form route.
        let direct = deviation(&phi, &m).unwrap().value;
        // Spectral-measure route.
        let eig = eigendecompose(&m).unwrap();
        let mu = induced_measure(&phi, &eig).unwrap();
        let via_measures = (first_moment(&mu) - mu.mass() * first_moment(&tracial_measure(&eig))).abs();
        let scale = phi.norm_squared() * m.trace() / n as f64;
        let rel = (direct - via_measures).abs() / direct.max(1e-6 * scale);
        worst = worst.max(rel);
    }
    Outcome {
        passed: worst <= 1e-8,
        detail: format!("max relative gap {worst:.3e} over 500 instances, n ≤ 200 (limit 1e-8)"),
    }
}

fn c3_causal_population() -> Outcome {
    let config = ExperimentConfig {
        n: vec![10],
        samples: 0,
        runs: 200,
        c: CSpec::Zero,
        spectrum: SpectrumSpec::random(0.5, 1.0),
        seed: 103,
        ..Default::default()
    };
    let dist = run_distribution(&config).unwrap().remove(0);
    let below = dist.records.iter().filter(|r| r.d <= 0.5).count() as f64 / dist.records.len() as f64;
    Outcome {
        passed: below >= 0.90 && dist.failures.is_empty(),
        detail: format!(
            "P(D ≤ 0.5) = {below:.3} over {} runs, {} failures (limit ≥ 0.90)",
            dist.records.len(),
            dist.failures.len()
        ),
    }
}

fn c4_confounded_accuracy() -> Outcome {
    let config = ExperimentConfig {
        n: vec![10],
        samples: 500,
        runs: 200,
        c: CSpec::Uniform { lo: 2.0, hi: 3.0 },
        seed: 104,
        ..Default::default()
    };
    let table = run_benchmark(&config).unwrap();
    let acc = table.accuracy(Method::Ours, 10).unwrap();
    Outcome {
        passed: acc >= 74.0,
        detail: format!("detection accuracy {acc:.1}% (limit ≥ 74%)"),
    }
}

fn c5_constant_closed_form() -> Outcome {
    let (n, c, r_b, sigma1) = (200, 10.0, 1.0, 1.0);
    let mut rng = run_rng(105, 0);
    let mut params = ModelParams::new(n, c);
    params.r_b = r_b;
    params.spectrum = SpectrumSpec::constant(sigma1);
    let values: Vec<f64> = (0..50)
        .map(|_| population_deviation(&build_model(&params, &mut rng).unwrap()).unwrap().value)
        .collect();
    let med = median(values);
    let expected = closed_form(ClosedFormKind::Constant, c, r_b, sigma1);
    let rel = (med - expected).abs() / expected;
    Outcome {
        passed: rel <= 0.02,
        detail: format!("median D = {med:.4}, closed form {expected:.4}, relative gap {rel:.4} (limit 0.02)"),
    }
}

fn c6_polynomial_limit() -> Outcome {
    let (n, c, r_b) = (2000, 2.0, 1.0);
    let spec = SpectrumSpec::polynomial(1.0);
    let theta = finite_n_theta_terms(&spectrum(&spec, n).unwrap(), r_b).unwrap().deviation(c, r_b);
    let mut rng = run_rng(106, 0);
    let mut params = ModelParams::new(n, c);
    params.spectrum = spec;
    let values: Vec<f64> = (0..5)
        .map(|_| population_deviation(&build_model(&params, &mut rng).unwrap()).unwrap().value)
        .collect();
    let med = median(values);
    let target = c * c;
    let rel_theta = (theta - target).abs() / target;
    let rel_pop = (med - target).abs() / target;
    Outcome {
        passed: rel_theta <= 0.05 && rel_pop <= 0.05,
        detail: format!(
            "θ-form D = {theta:.4}, population median D = {med:.4}, c² = {target} (relative gaps {rel_theta:.4}, {rel_pop:.4}; limit 0.05)"
        ),
    }
}

fn c7_exponential_point() -> Outcome {
    let (n, c, sigma1) = (200, 1.5, 1.0);
    let spec = spectrum(&SpectrumSpec::exponential(sigma1, (-1.0f64).exp()), n).unwrap();
    let rb2 = std::f64::consts::E * sigma1 / 2.0;
    let d = |r2: f64| finite_n_theta_terms(&spec, r2.sqrt()).unwrap().deviation(c, r2.sqrt());
    let on = d(rb2);
    let (lo, hi) = (d(0.5 * rb2), d(1.5 * rb2));
    let finite_radius = nonidentifiable_radius_sq_from_spectrum(&spec).unwrap().unwrap_or(f64::NAN);
    Outcome {
        passed: on <= 0.05 * c * c && lo >= 5.0 * on && hi >= 5.0 * on,
        detail: format!(
            "D(r_b² = eσ₁/2) = {on:.3e} (limit {:.3e}); D at ±50% = {lo:.4}, {hi:.4} (limit ≥ {:.3e}); finite-n radius {finite_radius:.4} vs {rb2:.4}",
            0.05 * c * c,
            5.0 * on
        ),
    }
}

fn c8_sherman_morrison() -> Outcome {
    let mut rng = run_rng(108, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(1..=50);
        let sigma_e = random_psd(n, 0.1, &mut rng);
        let b = gaussian_vec(n, &mut rng);
        let sm = sherman_morrison_solve(&SymMatrix::new(sigma_e.clone()).unwrap(), &b).unwrap();
        let dense = (sigma_e + &b * b.transpose()).try_inverse().unwrap() * &b;
        worst = worst.max((&sm - &dense).norm() / dense.norm());
    }
    Outcome {
        passed: worst <= 1e-8,
        detail: format!("max relative error vs dense inverse {worst:.3e} (limit 1e-8)"),
    }
}

fn c9_consistency() -> Outcome {
    let mut rng = run_rng(109, 0);
    let mut params = ModelParams::new(10, 2.0);
    params.spectrum = SpectrumSpec::random(0.5, 1.0);
    let model = build_model(&params, &mut rng).unwrap();
    let d_pop = population_deviation(&model).unwrap().value;
    let median_error = |samples: usize, stream: u64| {
        let mut rng = run_rng(109, stream);
        median(
            (0..50)
                .map(|_| (empirical_deviation(&sample(&model, samples, &mut rng).unwrap()).unwrap() - d_pop).abs())
                .collect(),
        )
    };
    let e2000 = median_error(2000, 1);
    let e8000 = median_error(8000, 2);
    Outcome {
        passed: e8000 <= 0.6 * e2000,
        detail: format!("median |D̂ − D| = {e2000:.4} at L = 2000, {e8000:.4} at L = 8000 (ratio {:.3}, limit 0.6)", e8000 / e2000),
    }
}

fn c10_threshold_sweep() -> Outcome {
    let config = ExperimentConfig {
        n: vec![10],
        samples: 500,
        runs: 100,
        c: CSpec::Uniform { lo: 2.0, hi: 3.0 },
        spectrum: SpectrumSpec::random(0.0, 1.0),
        seed: 110,
        ..Default::default()
    };
    let gammas: Vec<f64> = (0..=50).map(|k| k as f64 * 0.02).collect();
    let sweep = threshold_sweep(&config, &gammas).unwrap();
    let monotone = sweep
        .points
        .windows(2)
        .all(|w| w[1].tpr <= w[0].tpr && w[1].fpr <= w[0].fpr);
    let best = sweep.best_gamma(10).unwrap();
    let gap = sweep
        .points
        .iter()
        .map(|p| p.tpr - p.fpr)
        .fold(f64::NEG_INFINITY, f64::max);
    Outcome {
        passed: monotone && (0.2..=0.8).contains(&best),
        detail: format!("monotone = {monotone}, argmax γ = {best:.2} with TPR − FPR = {gap:.2} (limit [0.2, 0.8])"),
    }
}

fn c11_baseline_ordering() -> Outcome {
    let config = ExperimentConfig {
        n: vec![10],
        samples: 500,
        runs: 200,
        c: CSpec::Zero,
        seed: 111,
        method: Method::Both,
        metric: Metric::Euclidean,
        ..Default::default()
    };
    let table = run_benchmark(&config).unwrap();
    let ours = table.accuracy(Method::Ours, 10).unwrap();
    let js = table.accuracy(Method::Js, 10).unwrap();
    Outcome {
        passed: ours - js >= 20.0,
        detail: format!("ours {ours:.1}% vs baseline {js:.1}% (gap {:.1} points, limit ≥ 20)", ours - js),
    }
}

fn c12_chebyshev() -> Outcome {
    let mut rng = run_rng(112, 0);
    let mut violations = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=100);
        let spec: Vec<f64> = (0..n).map(|_| rng.random_range(1e-3..10.0)).collect();
        let t = InverseTraces::of(&spec).unwrap();
        let first = t.t1 <= t.t2 * t.t0 * (1.0 + 1e-12);
        let second = t.t1 * t.t1 >= t.t2 / n as f64 * (1.0 - 1e-12);
        if !(first && second) {
            violations += 1;
        }
    }
    Outcome {
        passed: violations == 0,
        detail: format!("{violations} violations over 1000 spectra"),
    }
}

fn c13_csv_round_trip() -> Outcome {
    let mut rng = run_rng(113, 0);
    let mut params = ModelParams::new(8, 2.5);
    params.spectrum = SpectrumSpec::random(0.5, 1.0);
    let model = build_model(&params, &mut rng).unwrap();
    let data = sample(&model, 500, &mut rng).unwrap();
    let in_memory = detect(&data, 0.5).unwrap().d_hat;

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.csv");
    data.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    let mut options = AnalyzeOptions::new("y");
    options.normalize = false;
    let from_file = analyze_csv(&path, &options).unwrap().reports[0].d_hat;
    let gap = (from_file - in_memory).abs();
    Outcome {
        passed: gap <= 1e-10,
        detail: format!("D̂ in memory {in_memory:.6}, from CSV {from_file:.6}, gap {gap:.1e} (limit 1e-10)"),
    }
}

type Check = (&'static str, &'static str, Duration, fn() -> Outcome);

fn main() {
    let checks: Vec<Check> = vec![
        ("C1", "isotropy null", secs(1), c1_isotropy),
        ("C2", "moment-route equivalence", secs(30), c2_moment_routes),
        ("C3", "causal models at population level", secs(10), c3_causal_population),
        ("C4", "confounded detection at L = 500", secs(60), c4_confounded_accuracy),
        ("C5", "constant-spectrum closed form", secs(60), c5_constant_closed_form),
        ("C6", "polynomial-decay limit", secs(120), c6_polynomial_limit),
        ("C7", "exponential non-identifiable point", secs(10), c7_exponential_point),
        ("C8", "Sherman-Morrison equivalence", secs(5), c8_sherman_morrison),
        ("C9", "consistency in L", secs(120), c9_consistency),
        ("C10", "threshold sweep shape", secs(120), c10_threshold_sweep),
        ("C11", "baseline ordering", secs(300), c11_baseline_ordering),
        ("C12", "Chebyshev inequalities", secs(1), c12_chebyshev),
        ("C13", "CSV round trip", secs(5), c13_csv_round_trip),
    ];
    let mut failed = 0;
    for (id, title, budget, f) in checks {
        if !check(id, title, budget, f) {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", 13 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
