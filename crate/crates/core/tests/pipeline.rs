use csiloc::config::ExperimentConfig;
use csiloc::dataset::{LabeledDataset, Split};
use csiloc::evaluation::{evaluate_split, sweep_antennas, sweep_gamma, LearnerSpec};
use csiloc::features::antenna_subset;
use csiloc::learners::{model_load, model_save, ElmConfig, ElmModel, Model, Provenance, Regressor};
use csiloc::pipeline::{build_covariances, build_dataset, run_sweep, simulate, train_learner, train_test, write_sweep, SweepRequest};
use csiloc::Error;

fn reduced(seed: u64, windows: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::with_seed(seed);
    c.split.max_windows = Some(windows);
    c.learner.neurons = 300;
    c
}

#[test]
fn dataset_rebuild_is_bitwise_identical() {
    let c = reduced(4, 120);
    let a = build_dataset(&c).unwrap();
    let b = build_dataset(&c).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.provenance().master_seed, 4);
    assert_eq!(a.provenance().config_hash, c.config_hash().unwrap());
    let other = build_dataset(&reduced(5, 120)).unwrap();
    assert_ne!(a.to_bytes(), other.to_bytes());
}

#[test]
fn windows_hold_ten_snapshots_and_carry_mean_labels() {
    let c = reduced(2, 30);
    let (_, samples) = simulate(&c).unwrap();
    assert_eq!(samples.snapshots.len(), 300);
    let ds = build_dataset(&c).unwrap();
    assert_eq!(ds.len(), 30);
    assert_eq!(ds.feature_dim(), 32 * 32);
    let first: Vec<_> = samples.snapshots[..10].iter().map(|s| s.ue_position).collect();
    let mx = first.iter().map(|p| p.x).sum::<f64>() / 10.0;
    let my = first.iter().map(|p| p.y).sum::<f64>() / 10.0;
    let got = ds.records()[0].position;
    assert!((got.x - mx).abs() < 1e-9 && (got.y - my).abs() < 1e-9);
}

#[test]
fn files_round_trip_on_simulated_data() {
    let c = reduced(6, 80);
    let ds = build_dataset(&c).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for name in ["d.bin", "d.csv"] {
        let p = dir.path().join(name);
        ds.save(&p).unwrap();
        assert_eq!(LabeledDataset::load(&p).unwrap(), ds);
    }
    let fitted = train_learner(&c, &ds).unwrap();
    let prov = c.provenance().unwrap();
    let (back, p2) = model_load(&model_save(&fitted.model, prov).unwrap()).unwrap();
    assert_eq!(p2, prov);
    let all = ds.samples(None);
    assert_eq!(back.predict_batch(&all.features).unwrap(), fitted.model.predict_batch(&all.features).unwrap());
}

#[test]
fn append_then_retrain_matches_merged_training() {
    let c = reduced(8, 100);
    let ds = build_dataset(&c).unwrap();
    let (head, tail) = ds.records().split_at(60);
    let mut a = LabeledDataset::new(ds.antennas(), ds.provenance());
    let mut b = LabeledDataset::new(ds.antennas(), ds.provenance());
    head.iter().for_each(|r| a.push(r.clone()).unwrap());
    tail.iter().for_each(|r| b.push(r.clone()).unwrap());
    let merged = a.append(&b).unwrap();
    assert_eq!(merged, ds);
    assert_eq!(a.append(&LabeledDataset::new(ds.antennas(), ds.provenance())).unwrap(), a);

    let cfg = ElmConfig {
        neurons: 150,
        gamma: 1e-2,
        seed: 3,
        ..Default::default()
    };
    let train = |d: &LabeledDataset| {
        let s = d.samples(Some(Split::Train));
        ElmModel::from_config(&cfg, s.dim()).unwrap().train(&s.features, &s.positions).unwrap()
    };
    let via_append = train(&merged);
    let manual = train(&ds);
    let diff = (via_append.beta().unwrap() - manual.beta().unwrap()).norm() / manual.beta().unwrap().norm();
    assert!(diff <= 1e-12, "{diff}");

    let small = build_dataset(&{
        let mut c2 = reduced(8, 10);
        c2.geometry_file = None;
        c2
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("g.toml"),
        "[planar]\ncolumns = 2\nrows = 2\nhorizontal_spacing_m = 0.04\nvertical_spacing_m = 0.04\n",
    )
    .unwrap();
    let mut c3 = reduced(8, 10);
    c3.geometry_file = Some(dir.path().join("g.toml"));
    let four = build_dataset(&c3).unwrap();
    assert!(matches!(small.append(&four), Err(Error::DimensionMismatch(_))));
}

#[test]
fn full_array_antenna_sweep_reproduces_baseline() {
    let c = reduced(9, 150);
    let covs = build_covariances(&c).unwrap();
    let spec = c.learner.spec(c.master_seed).unwrap();
    let n = covs.geometry.len();
    let r = sweep_antennas(&[1, 4, n], &covs, &spec, c.provenance().unwrap()).unwrap();
    let (train, test) = train_test(&covs.dataset().unwrap());
    let (gamma, train_mse, test_mse, report) = evaluate_split(&spec, &train, &test).unwrap();
    let full = &r.points[2];
    assert_eq!(full.test_errors.as_ref().unwrap(), &report);
    assert_eq!(full.train.mean_mse, train_mse);
    assert_eq!(full.test.mean_mse, test_mse);
    assert_eq!(full.gamma, gamma);
    assert_eq!(covs.restricted(&antenna_subset(&covs.geometry, n).unwrap()).unwrap(), covs.dataset().unwrap());

    let single = r.points[0].test_errors.as_ref().unwrap();
    assert!(single.per_sample.iter().all(|e| e.1.is_finite()));
    assert!(sweep_antennas(&[n + 1], &covs, &spec, Provenance::default()).is_err());
}

#[test]
fn gamma_sweep_optimum_is_grid_argmin() {
    let c = reduced(3, 200);
    let (train, test) = train_test(&build_dataset(&c).unwrap());
    let grid = csiloc::config::parse_grid("1e-6:1e2:log").unwrap();
    let cfg = ElmConfig {
        neurons: 300,
        ..c.learner.elm_config(3)
    };
    let r = sweep_gamma(&grid, &train, &test, &cfg, 6, c.provenance().unwrap()).unwrap();
    let means: Vec<f64> = r.points.iter().map(|p| p.test.mean_mse).collect();
    let best = means.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    // decreasing up to the optimum and increasing after it, up to Monte-Carlo noise
    for i in 1..means.len() {
        let band = 2.0 * (r.points[i].test.std_error + r.points[i - 1].test.std_error);
        if i <= best {
            assert!(means[i] <= means[i - 1] + band, "{means:?}");
        } else {
            assert!(means[i] + band >= means[i - 1], "{means:?}");
        }
    }
    let spec = LearnerSpec::Elm {
        config: cfg,
        gamma_grid: grid.clone(),
    };
    let fitted = csiloc::evaluation::fit_learner(&spec, &train, &test).unwrap();
    assert!(matches!(fitted.model, Model::Elm(_)));
}

#[test]
fn sweep_files_are_named_by_axis_and_seed() {
    let mut c = reduced(12, 80);
    c.learner.neurons = 40;
    let r = run_sweep(
        &c,
        &SweepRequest {
            axis: Some(csiloc::evaluation::SweepAxis::Neurons),
            grid: Some("10,20,40".into()),
            realizations: Some(3),
        },
    )
    .unwrap();
    assert_eq!(r.points.len(), 3);
    let dir = tempfile::tempdir().unwrap();
    let (csv, json) = write_sweep(&r, dir.path()).unwrap();
    assert!(csv.ends_with("sweep_neurons_seed12.csv"));
    assert!(json.ends_with("sweep_neurons_seed12.json"));
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("neurons,")).count(), 3 * 4);
}

#[test]
fn stage_errors_name_the_stage() {
    let mut c = reduced(1, 10);
    c.trajectory.speed_mps = -1.0;
    match build_dataset(&c) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, "trajectory"),
        other => panic!("{other:?}"),
    }
}
