//! Seeded Monte-Carlo checks of the statistical behaviour of the statistic.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use spectral_confound::detector::{empirical_deviation, normalize_unit_variance};
use spectral_confound::deviation::deviation;
use spectral_confound::harness::{
    analyze_csv, run_benchmark, run_distribution, AnalyzeOptions, ExperimentConfig, Method,
};
use spectral_confound::models::{
    build_model, population_deviation, population_quantities, run_rng, sample, sample_with_confounder, uniform_sphere,
    CSpec, ConfoundedModel, Dataset, ModelParams, SpectrumSpec,
};
use spectral_confound::spectral::SymMatrix;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn random_params(n: usize, c: f64) -> ModelParams {
    let mut p = ModelParams::new(n, c);
    p.spectrum = SpectrumSpec::random(0.5, 1.0);
    p
}

fn norm_split_gap(model: &ConfoundedModel) -> f64 {
    let pop = population_quantities(model).unwrap();
    let conf = &pop.regression - &model.a;
    let total = pop.regression.norm_squared();
    (total - model.a.norm_squared() - conf.norm_squared()).abs() / total
}

#[test]
fn regression_norm_splits_into_causal_and_confounding_parts() {
    // The cross term 2aᵀ(cΣ_X⁻¹b) relative to ‖ã‖² is of order 1/√n times
    // 2x/(1 + x²), x = ‖cΣ_X⁻¹b‖; at n = 300 the 5% bound needs x away from 1.
    for c in [0.3, 20.0] {
        let mut rng = run_rng(201, c as u64);
        let close = (0..100)
            .filter(|_| norm_split_gap(&build_model(&random_params(300, c), &mut rng).unwrap()) < 0.05)
            .count();
        assert!(close >= 95, "c = {c}: {close} of 100 trials within 5%");
    }
    // Balanced parts: the gap still shrinks with n.
    let med = |n: usize| {
        let mut rng = run_rng(201, n as u64);
        median(
            (0..100)
                .map(|_| norm_split_gap(&build_model(&random_params(n, 1.7), &mut rng).unwrap()))
                .collect(),
        )
    };
    let (small, large) = (med(30), med(300));
    assert!(large < 0.5 * small, "median gap {small} at n = 30, {large} at n = 300");
}

#[test]
fn causal_deviation_shrinks_with_dimension() {
    let med = |n: usize| {
        let mut rng = run_rng(202, n as u64);
        median(
            (0..200)
                .map(|_| {
                    let model = build_model(&random_params(n, 0.0), &mut rng).unwrap();
                    let pop = population_quantities(&model).unwrap();
                    deviation(&model.a, &pop.sigma_x).unwrap().value / model.a.norm_squared()
                })
                .collect(),
        )
    };
    let (m10, m100) = (med(10), med(100));
    assert!(m100 < m10, "median at n=100 {m100} vs n=10 {m10}");
}

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut worst) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    worst
}

fn rotate(model: &ConfoundedModel, q: &DMatrix<f64>) -> ConfoundedModel {
    ConfoundedModel {
        a: q * &model.a,
        b: q * &model.b,
        sigma_e: SymMatrix::new(q * model.sigma_e.as_matrix() * q.transpose()).unwrap(),
        ..model.clone()
    }
}

#[test]
fn generator_statistics_survive_rotation() {
    let n = 10;
    let mut rng = run_rng(203, 0);
    let params = random_params(n, 1.0);
    let plain: Vec<f64> = (0..200)
        .map(|_| population_deviation(&build_model(&params, &mut rng).unwrap()).unwrap().value)
        .collect();
    let rotated: Vec<f64> = (0..200)
        .map(|_| {
            let model = build_model(&params, &mut rng).unwrap();
            let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
            population_deviation(&rotate(&model, &g.qr().q())).unwrap().value
        })
        .collect();
    // Critical value of the two-sample test at the 1% level.
    let critical = 1.628 * (400.0f64 / (200.0 * 200.0)).sqrt();
    let ks = ks_statistic(&plain, &rotated);
    assert!(ks < critical, "KS statistic {ks} above {critical}");
}

#[test]
fn estimation_error_decreases_with_sample_size() {
    let mut rng = run_rng(204, 0);
    let model = build_model(&random_params(10, 2.0), &mut rng).unwrap();
    let d_pop = population_deviation(&model).unwrap().value;
    let errors: Vec<f64> = [500usize, 2000, 8000]
        .iter()
        .map(|&l| {
            let mut rng = run_rng(204, l as u64);
            median(
                (0..200)
                    .map(|_| (empirical_deviation(&sample(&model, l, &mut rng).unwrap()).unwrap() - d_pop).abs())
                    .collect(),
            )
        })
        .collect();
    assert!(errors[1] < errors[0] && errors[2] < errors[1], "{errors:?}");
    assert!(errors[2] <= 0.6 * errors[1], "{errors:?}");
}

#[test]
fn population_accuracy_bounds_finite_sample_accuracy() {
    let accuracy = |samples: usize, seed: u64| {
        let config = ExperimentConfig {
            n: vec![10],
            samples,
            runs: 100,
            c: CSpec::Uniform { lo: 1.0, hi: 2.0 },
            seed,
            ..Default::default()
        };
        run_benchmark(&config).unwrap().accuracy(Method::Ours, 10).unwrap()
    };
    let pop = median((0..5).map(|s| accuracy(0, s)).collect());
    let finite = median((0..5).map(|s| accuracy(500, s)).collect());
    // Allow a few runs of sampling noise.
    assert!(pop + 5.0 >= finite, "population {pop} vs L=500 {finite}");
}

#[test]
fn causal_population_runs_rarely_exceed_threshold() {
    let config = ExperimentConfig {
        n: vec![10],
        samples: 0,
        c: CSpec::Zero,
        spectrum: SpectrumSpec::random(0.5, 1.0),
        seed: 205,
        ..Default::default()
    };
    let dist = run_distribution(&config).unwrap().remove(0);
    assert!(dist.exceedance_at(0.5) < 0.1);

    let config = ExperimentConfig {
        c: CSpec::Uniform { lo: 2.0, hi: 3.0 },
        ..config
    };
    let dist = run_distribution(&config).unwrap().remove(0);
    assert!(dist.exceedance_at(0.5) > 0.7);
}

#[test]
fn pipeline_is_identical_across_thread_counts() {
    let config = ExperimentConfig {
        n: vec![6, 12],
        samples: 200,
        runs: 40,
        c: CSpec::Normal,
        method: Method::Both,
        spectrum: SpectrumSpec::random(0.2, 1.0),
        seed: 206,
        ..Default::default()
    };
    let run_with = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| (run_distribution(&config).unwrap(), run_benchmark(&config).unwrap()))
    };
    assert_eq!(run_with(1), run_with(4));
}

/// Dataset with an extra column that tracks the latent confounder.
fn with_proxy(data: &Dataset, z: &DVector<f64>, noise: f64, seed: u64) -> Dataset {
    let mut rng = run_rng(seed, 99);
    let l = data.len();
    let proxy = DVector::from_fn(l, |i, _| {
        let e: f64 = StandardNormal.sample(&mut rng);
        z[i] + noise * e
    });
    let mut x = data.x.clone().insert_column(data.n(), 0.0);
    x.set_column(data.n(), &proxy);
    let mut names = data.feature_names.clone();
    names.push("proxy".into());
    Dataset::new(x, data.y.clone()).unwrap().with_names(names, data.target_name.clone()).unwrap()
}

#[test]
fn dropping_a_confounder_proxy_raises_the_deviation() {
    let mut rng = run_rng(207, 0);
    // With few features the proxy's own coordinate dominates the regression
    // vector; fifty keeps the extended vector close to generic.
    let model = build_model(&random_params(50, 2.5), &mut rng).unwrap();
    let (data, z) = sample_with_confounder(&model, 3000, &mut rng).unwrap();
    let data = with_proxy(&data, &z, 0.1, 207);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("planted.csv");
    data.write_csv(std::fs::File::create(&path).unwrap()).unwrap();

    let mut options = AnalyzeOptions::new("y");
    options.subsample = Some(500);
    options.repeats = 30;
    options.seed = 7;
    let kept = analyze_csv(&path, &options).unwrap();
    options.drop = vec!["proxy".into()];
    let dropped = analyze_csv(&path, &options).unwrap();
    let (k, d) = (kept.median_d().unwrap(), dropped.median_d().unwrap());
    assert!(d > k, "median D̂ with proxy {k}, without {d}");
    assert_eq!(kept.reports.len(), 30);
    assert_eq!(dropped.reports[0].n, 50);
}

#[test]
fn csv_round_trip_matches_in_memory_detection() {
    let mut rng = run_rng(208, 0);
    let model = build_model(&random_params(7, 1.5), &mut rng).unwrap();
    let data = sample(&model, 400, &mut rng).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.csv");
    data.write_csv(std::fs::File::create(&path).unwrap()).unwrap();

    let from_file = analyze_csv(&path, &AnalyzeOptions::new("y")).unwrap();
    let expected = empirical_deviation(&normalize_unit_variance(&data).unwrap()).unwrap();
    assert!((from_file.reports[0].d_hat - expected).abs() <= 1e-10);
    assert!(from_file.reports[0].normalized);
}

#[test]
fn sphere_coordinates_are_symmetric() {
    // Mean of each coordinate of a uniform unit vector is zero.
    let mut rng = run_rng(209, 0);
    let n = 5;
    let mut sum = DVector::zeros(n);
    for _ in 0..20_000 {
        sum += uniform_sphere(n, 1.0, &mut rng);
    }
    assert!((sum / 20_000.0).amax() < 0.02);
}
