//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any fails. Positional arguments select criteria by
//! number (`cargo test -p csiloc --test acceptance -- 3 4`).

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

use csiloc::config::ExperimentConfig;
use csiloc::dataset::{Samples, Split};
use csiloc::evaluation::{
    compare_learners, fit_learner, monte_carlo_mse, sweep_antennas, sweep_gamma, sweep_neurons, sweep_csv, sweep_json, ErrorReport, LearnerSpec,
    ROW_AVERAGE, ROW_MAXIMUM, ROW_MEDIAN,
};
use csiloc::features::{antenna_subset, normalize_and_vectorize, sample_covariance, SampleCovariance};
use csiloc::learners::{Activation, ElmConfig, ElmModel, KnnModel, Provenance, Regressor, RidgeForm};
use csiloc::pipeline::{build_covariances, build_dataset, evaluate_model, run_report, train_learner, train_test};
use csiloc::scene::{apply_common_phase, ChannelSnapshot};
use csiloc::seed::{self, Rng};
use csiloc::{Position2D, C64};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_snapshots(rng: &mut Rng, n: usize, count: usize) -> Vec<ChannelSnapshot> {
    (0..count)
        .map(|i| ChannelSnapshot {
            h: DVector::from_fn(n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))),
            timestamp_s: i as f64 * 0.1,
            ue_position: Position2D::new(rng.random_range(0.0..200.0), rng.random_range(0.0..300.0)),
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut rng = seed::stream(101);
    let mut lens = Vec::new();
    for n in [2usize, 4, 8, 16, 56] {
        let cov = sample_covariance(&random_snapshots(&mut rng, n, 10)).unwrap();
        lens.push((n, normalize_and_vectorize(&cov).unwrap().values.len()));
    }
    let pass = lens.iter().all(|&(n, m)| m == n * n);
    outcome(pass, format!("(N, len) = {lens:?}"))
}

fn criterion_2() -> Outcome {
    let mut rng = seed::stream(202);
    let mut worst_scale = 0.0f64;
    let mut worst_phase = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=16usize);
        let s = rng.random_range(1..=20usize);
        let snaps = random_snapshots(&mut rng, n, s);
        let cov = sample_covariance(&snaps).unwrap();
        let base = normalize_and_vectorize(&cov).unwrap().values;
        for alpha in [1e-3, 1.0, 1e3] {
            let scaled = SampleCovariance {
                matrix: cov.matrix.map(|v| v * alpha),
                ..cov.clone()
            };
            let f = normalize_and_vectorize(&scaled).unwrap().values;
            for (a, b) in f.iter().zip(&base) {
                worst_scale = worst_scale.max((a - b).abs());
            }
        }
        let rotated: Vec<ChannelSnapshot> = snaps
            .iter()
            .map(|h| apply_common_phase(h, rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        let diff = (sample_covariance(&rotated).unwrap().matrix - &cov.matrix).norm();
        worst_phase = worst_phase.max(diff);
    }
    outcome(
        worst_scale <= 1e-12 && worst_phase <= 1e-10,
        format!("max feature deviation under scaling {worst_scale:.2e} (≤1e-12), max covariance change under phases {worst_phase:.2e} (≤1e-10)"),
    )
}

/// Minimizer of ‖Σᵀβ − Y‖² + γ‖β‖² by accelerated gradient descent.
fn ridge_by_descent(sigma: &DMatrix<f64>, y: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let n = sigma.nrows();
    let a = sigma * sigma.transpose() + DMatrix::identity(n, n) * gamma;
    let b = sigma * y;
    let mut v = DVector::from_element(n, 1.0);
    let mut lmax = 0.0;
    for _ in 0..500 {
        let w = &a * &v;
        lmax = w.norm() / v.norm();
        v = w / lmax;
    }
    let l = lmax * 1.05;
    let q = (l.sqrt() - gamma.sqrt()) / (l.sqrt() + gamma.sqrt());
    let mut beta = DMatrix::zeros(n, 2);
    let mut prev = beta.clone();
    let tol = 1e-14 * b.norm().max(1e-300);
    for _ in 0..5_000_000 {
        let look = &beta + (&beta - &prev) * q;
        let grad = &a * &look - &b;
        prev = beta;
        beta = look - grad / l;
        if (&a * &beta - &b).norm() <= tol {
            break;
        }
    }
    beta
}

fn criterion_3() -> Outcome {
    let mut rng = seed::stream(303);
    let mut worst_oracle = 0.0f64;
    let mut worst_forms = 0.0f64;
    for inst in 0..20 {
        let m = rng.random_range(1..=20usize);
        let t = rng.random_range(2..=60usize);
        let n = rng.random_range(1..=30usize);
        let gamma = 10f64.powf(rng.random_range(-1.0..1.0));
        let x = DMatrix::from_fn(m, t, |_, _| rng.random_range(-1.0..1.0));
        let pos: Vec<Position2D> = (0..t)
            .map(|_| Position2D::new(rng.random_range(0.0..200.0), rng.random_range(0.0..300.0)))
            .collect();
        let model = ElmModel::init(n, m, 1000 + inst, Activation::Relu, gamma).unwrap();
        let w = model.weights().clone();
        let sigma = DMatrix::from_fn(n, t, |i, j| {
            let mut s = 0.0;
            for k in 0..m {
                s += w[(i, k)] * x[(k, j)];
            }
            s.max(0.0)
        });
        let y = DMatrix::from_fn(t, 2, |j, c| if c == 0 { pos[j].x } else { pos[j].y });
        let oracle = ridge_by_descent(&sigma, &y, gamma);
        let primal = model.clone().train_with(&x, &pos, RidgeForm::Primal).unwrap();
        let dual = model.clone().train_with(&x, &pos, RidgeForm::Dual).unwrap();
        let auto = model.train(&x, &pos).unwrap();
        let on = oracle.norm().max(1e-300);
        for b in [primal.beta().unwrap(), dual.beta().unwrap(), auto.beta().unwrap()] {
            worst_oracle = worst_oracle.max((b - &oracle).norm() / on);
        }
        let pb = primal.beta().unwrap();
        worst_forms = worst_forms.max((pb - dual.beta().unwrap()).norm() / pb.norm().max(1e-300));
    }
    outcome(
        worst_oracle <= 1e-6 && worst_forms <= 1e-8,
        format!("max rel. deviation from descent oracle {worst_oracle:.2e} (≤1e-6), primal vs dual {worst_forms:.2e} (≤1e-8)"),
    )
}

/// Full-sort K-nN barycenter with the same metric and tie order.
fn knn_brute(features: &DMatrix<f64>, positions: &[Position2D], k: usize, x: &[f64]) -> Position2D {
    let mut all: Vec<(f64, usize)> = (0..features.ncols())
        .map(|j| {
            let mut d2 = 0.0;
            for (i, xi) in x.iter().enumerate() {
                let d = features[(i, j)] - xi;
                d2 += d * d;
            }
            (d2.sqrt(), j)
        })
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (mut sx, mut sy) = (0.0, 0.0);
    for &(_, j) in &all[..k] {
        sx += positions[j].x;
        sy += positions[j].y;
    }
    Position2D::new(sx / k as f64, sy / k as f64)
}

fn criterion_4() -> Outcome {
    let mut rng = seed::stream(404);
    let mut mismatches = 0;
    let mut queries = 0;
    for inst in 0..50 {
        let m = rng.random_range(1..=6usize);
        let t = rng.random_range(1..=80usize);
        let k = rng.random_range(1..=t);
        // small-integer features on every other instance, so equal distances occur
        let ints = inst % 2 == 0;
        let draw = |rng: &mut Rng| if ints { rng.random_range(0..3) as f64 } else { rng.random_range(-1.0..1.0) };
        let feats = DMatrix::from_fn(m, t, |_, _| draw(&mut rng));
        let pos: Vec<Position2D> = (0..t)
            .map(|_| Position2D::new(rng.random_range(0.0..200.0), rng.random_range(0.0..300.0)))
            .collect();
        let model = KnnModel::new(feats.clone(), pos.clone(), k).unwrap();
        for q in 0..10 {
            let x: Vec<f64> = if q < 3 {
                feats.column(rng.random_range(0..t)).iter().copied().collect()
            } else {
                (0..m).map(|_| draw(&mut rng)).collect()
            };
            queries += 1;
            let got = model.predict(&x).unwrap();
            let want = knn_brute(&feats, &pos, k, &x);
            if got.x.to_bits() != want.x.to_bits() || got.y.to_bits() != want.y.to_bits() {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("{mismatches} bitwise mismatches over {queries} queries on 50 instances"))
}

const GAMMA_GRID: &str = "1e-6:1e2:log";

fn e2e_config(master: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::with_seed(master);
    c.split.test_fraction = 1.0 / 6.0;
    c.split.max_windows = Some(2400);
    c.learner.neurons = 8000;
    c.learner.activation = Activation::Relu;
    c.learner.gamma_grid = Some(GAMMA_GRID.into());
    c
}

fn criterion_5() -> Outcome {
    let seeds = [1u64, 2, 3];
    let (mut mean, mut median, mut nn1) = (0.0, 0.0, 0.0);
    let mut sizes = Vec::new();
    for &s in &seeds {
        let c = e2e_config(s);
        let ds = build_dataset(&c).unwrap();
        sizes.push((ds.count(Split::Train), ds.count(Split::Test)));
        let report = evaluate_model(&train_learner(&c, &ds).unwrap().model, &ds).unwrap();
        mean += report.average / 3.0;
        median += report.median / 3.0;
        let (train, test) = train_test(&ds);
        let knn = fit_learner(&LearnerSpec::Knn { k: 1 }, &train, &test).unwrap();
        nn1 += ErrorReport::evaluate(&knn.model, &test).unwrap().average / 3.0;
    }
    let shapes = sizes.iter().all(|&s| s == (2000, 400));
    outcome(
        shapes && mean < 15.0 && median < 10.0 && nn1 < 20.0,
        format!("(T, T') = {sizes:?}; ELM mean {mean:.2} m (<15), median {median:.2} m (<10); 1-nN mean {nn1:.2} m (<20)"),
    )
}

fn criterion_6() -> Outcome {
    let grid = [4usize, 8, 16, 32];
    let mut avg = [0.0f64; 4];
    for s in 1..=5u64 {
        let c = e2e_config(s);
        let covs = build_covariances(&c).unwrap();
        let spec = c.learner.spec(s).unwrap();
        let r = sweep_antennas(&grid, &covs, &spec, c.provenance().unwrap()).unwrap();
        for (a, p) in avg.iter_mut().zip(&r.points) {
            *a += p.test_errors.as_ref().unwrap().average / 5.0;
        }
    }
    let change = (avg[3] - avg[2]).abs() / avg[2];
    outcome(
        avg[0] > avg[2] && change <= 0.2,
        format!(
            "mean error N=4 {:.2}, N=8 {:.2}, N=16 {:.2}, N=32 {:.2} m; N=4 > N=16, 16→32 change {:.1}% (≤20%)",
            avg[0],
            avg[1],
            avg[2],
            avg[3],
            100.0 * change
        ),
    )
}

/// Train/test samples on the first 240 windows with an 8-antenna subset.
fn small_instance(master: u64, windows: usize, antennas: usize) -> (Samples, Samples) {
    let mut c = e2e_config(master);
    c.split.max_windows = Some(windows);
    let covs = build_covariances(&c).unwrap();
    let ds = covs.restricted(&antenna_subset(&covs.geometry, antennas).unwrap()).unwrap();
    train_test(&ds)
}

fn criterion_7() -> Outcome {
    let (train, test) = small_instance(1, 240, 8);
    let t = train.len();
    let grid = [t / 4, t / 2, t, 2 * t, 4 * t];
    let gammas = csiloc::config::parse_grid(GAMMA_GRID).unwrap();
    let prov = Provenance { master_seed: 1, config_hash: 0 };
    let r = sweep_neurons(&grid, &train, &test, &ElmConfig::default(), &gammas, 25, prov).unwrap();
    let p = &r.points;
    let train_drop = p[4].train.mean_mse < p[1].train.mean_mse;
    let mut monotone = true;
    for w in p.windows(2) {
        let band = (w[0].test.std_error.powi(2) + w[1].test.std_error.powi(2)).sqrt();
        monotone &= w[1].test.mean_mse <= w[0].test.mean_mse + band;
    }
    let test: Vec<String> = p.iter().map(|q| format!("{:.1}±{:.1}", q.test.mean_mse, q.test.std_error)).collect();
    outcome(
        train_drop && monotone,
        format!(
            "T={t}, n={grid:?}: train mse n=4T {:.2} < n=T/2 {:.2}: {train_drop}; test mse {} non-increasing within 1 s.e.: {monotone}",
            p[4].train.mean_mse,
            p[1].train.mean_mse,
            test.join(", ")
        ),
    )
}

fn criterion_8() -> Outcome {
    let (train, test) = small_instance(2, 120, 4);
    let cfg = ElmConfig {
        neurons: 40,
        gamma: 1e-2,
        ..ElmConfig::default()
    };
    let (_, te100) = monte_carlo_mse(&cfg, &train, &test, 100, 8).unwrap();
    let (_, te400) = monte_carlo_mse(&cfg, &train, &test, 400, 8).unwrap();
    let ratio = te100.std_error / te400.std_error;
    outcome(
        (1.2..=2.8).contains(&ratio),
        format!("std_error R=100 {:.4}, R=400 {:.4}, ratio {ratio:.3} (expected 2 ± 40%)", te100.std_error, te400.std_error),
    )
}

fn criterion_9() -> Outcome {
    let mut c = ExperimentConfig::with_seed(11);
    c.split.max_windows = Some(300);
    c.learner.neurons = 500;
    c.learner.gamma_grid = Some("1e-4:1e2:log".into());
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let files: Vec<_> = dirs.iter().map(|d| run_report(&c, d.path()).unwrap()).collect();
    let mut identical = true;
    let mut names = Vec::new();
    for (a, b) in [
        (&files[0].dataset, &files[1].dataset),
        (&files[0].model, &files[1].model),
        (&files[0].report, &files[1].report),
        (&files[0].error_map, &files[1].error_map),
        (&files[0].histogram, &files[1].histogram),
    ] {
        identical &= std::fs::read(a).unwrap() == std::fs::read(b).unwrap();
        names.push(a.file_name().unwrap().to_string_lossy().into_owned());
    }
    let (train, test) = train_test(&build_dataset(&c).unwrap());
    let cfg = c.learner.elm_config(11);
    let grid = [1e-3, 1e-1, 10.0];
    let s1 = sweep_gamma(&grid, &train, &test, &cfg, 3, c.provenance().unwrap()).unwrap();
    let s2 = sweep_gamma(&grid, &train, &test, &cfg, 3, c.provenance().unwrap()).unwrap();
    let sweeps = sweep_csv(&s1) == sweep_csv(&s2) && sweep_json(&s1) == sweep_json(&s2);
    outcome(
        identical && sweeps,
        format!("files {names:?} bitwise identical: {identical}; sweep CSV/JSON identical: {sweeps}"),
    )
}

fn criterion_10() -> Outcome {
    let mut c = ExperimentConfig::with_seed(5);
    c.split.max_windows = Some(400);
    let (train, test) = train_test(&build_dataset(&c).unwrap());
    let elm = ElmConfig {
        neurons: 1000,
        ..c.learner.elm_config(5)
    };
    let grid = csiloc::config::parse_grid(GAMMA_GRID).unwrap();
    let cmp = compare_learners(&train, &test, &elm, &grid, 3).unwrap();
    let table = cmp.table();
    let lines: Vec<&str> = table.lines().collect();
    let layout = lines.len() == 4
        && lines[0].contains("ELM (ReLu)")
        && lines[0].contains("3-nN")
        && lines[1].starts_with(ROW_AVERAGE)
        && lines[2].starts_with(ROW_MEDIAN)
        && lines[3].starts_with(ROW_MAXIMUM);
    let recall = compare_learners(&train, &train, &elm, &grid, 1).unwrap();
    outcome(
        layout && recall.knn.average == 0.0,
        format!("table layout ok: {layout}; 1-nN average on train=test: {}\n{table}", recall.knn.average),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, u64, fn() -> Outcome); 10] = [
        (1, "feature-dimension law", 1, criterion_1),
        (2, "pathloss and phase invariance", 5, criterion_2),
        (3, "ridge solver vs descent oracle", 30, criterion_3),
        (4, "K-nN vs brute force", 5, criterion_4),
        (5, "end-to-end synthetic localization", 600, criterion_5),
        (6, "antenna-count trend", 1800, criterion_6),
        (7, "neuron-count trend", 1800, criterion_7),
        (8, "Monte-Carlo standard error scaling", 300, criterion_8),
        (9, "determinism", 120, criterion_9),
        (10, "learner comparison table", 60, criterion_10),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, limit_s, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= Duration::from_secs(limit_s), o.detail),
            Err(_) => (false, "panicked".to_string()),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {} {name}: {detail} [{:.1}s, limit {limit_s}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
