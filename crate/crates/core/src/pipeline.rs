//! End-to-end recipes: simulate, featurize, split, train, evaluate, and
//! write artifacts.
//!
//! Every random draw comes from a stream derived from the master seed by
//! label: `scene` (cluster layout of the default scene), `rays` (ray points),
//! `snapshots` (small-scale fading, noise and common phases) and
//! `elm-weights` (hidden weights, one index per realization).

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::dataset::{CovarianceSet, LabeledDataset, Samples, Split};
use crate::evaluation::{
    compare_learners, error_histogram, error_map_export, evaluation_report, fit_learner, sweep_activation, sweep_antennas, sweep_csv,
    sweep_file_stem, sweep_gamma, sweep_json, sweep_neurons, Comparison, ErrorReport, Fitted, SweepAxis, SweepResult, DEFAULT_BIN_WIDTH_M,
};
use crate::features::sample_covariance;
use crate::learners::{model_save, Model, Provenance};
use crate::scene::{sample_trajectory_prefix, ArrayGeometry, ChannelModel, TrajectorySamples};
use crate::{config, seed, Error, Result};

/// Simulated snapshots along the configured trajectory, stopping once
/// `max_windows` windows are covered.
pub fn simulate(config: &ExperimentConfig) -> Result<(ArrayGeometry, TrajectorySamples)> {
    let scene = config.scene().map_err(|e| e.in_stage("scene"))?;
    let geometry = config.geometry().map_err(|e| e.in_stage("geometry"))?;
    let traj = config.trajectory.build().map_err(|e| e.in_stage("trajectory"))?;
    let model = ChannelModel::new(scene, geometry.clone(), &mut seed::labeled_stream(config.master_seed, "rays", 0))
        .map_err(|e| e.in_stage("scene"))?;
    let limit = match config.split.max_windows {
        Some(m) => m.saturating_mul(window_length(config)?),
        None => usize::MAX,
    };
    let samples = sample_trajectory_prefix(&traj, &model, &mut seed::labeled_stream(config.master_seed, "snapshots", 0), limit)
        .map_err(|e| e.in_stage("simulation"))?;
    Ok((geometry, samples))
}

/// Snapshots per covariance window.
pub fn window_length(config: &ExperimentConfig) -> Result<usize> {
    let per = (config.window_seconds * config.trajectory.snapshot_rate_hz).round();
    if per < 1.0 {
        return Err(Error::Config(format!(
            "a {} s window holds no snapshot at {} Hz",
            config.window_seconds, config.trajectory.snapshot_rate_hz
        )));
    }
    Ok(per as usize)
}

/// Split tag per window: windows are grouped into segments of
/// `segment_windows`, and segments are sent to the test split evenly spaced
/// along the trajectory so that the test share tracks `test_fraction`.
pub fn segment_splits(windows: usize, test_fraction: f64, segment_windows: usize) -> Vec<Split> {
    let seg = segment_windows.max(1);
    let test_segment = |s: usize| {
        let a = (s as f64 * test_fraction + 1e-9).floor();
        let b = ((s + 1) as f64 * test_fraction + 1e-9).floor();
        b > a
    };
    (0..windows)
        .map(|w| if test_segment(w / seg) { Split::Test } else { Split::Train })
        .collect()
}

/// Non-overlapping window covariances over the simulated trajectory.
pub fn covariances_from(config: &ExperimentConfig, geometry: ArrayGeometry, samples: &TrajectorySamples) -> Result<CovarianceSet> {
    let per = window_length(config)?;
    let windows = samples.snapshots.len() / per;
    if windows == 0 {
        return Err(Error::InsufficientSnapshots(format!(
            "trajectory yields {} snapshots but one window needs {per}",
            samples.snapshots.len()
        ))
        .in_stage("windowing"));
    }
    let windows = config.split.max_windows.map_or(windows, |m| windows.min(m));
    let covariances = samples
        .snapshots
        .chunks_exact(per)
        .take(windows)
        .map(sample_covariance)
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("features"))?;
    Ok(CovarianceSet {
        geometry,
        covariances,
        splits: segment_splits(windows, config.split.test_fraction, config.split.segment_windows),
        provenance: config.provenance()?,
    })
}

pub fn build_covariances(config: &ExperimentConfig) -> Result<CovarianceSet> {
    let (geometry, samples) = simulate(config)?;
    covariances_from(config, geometry, &samples)
}

/// Simulates, featurizes and splits the configured experiment.
pub fn build_dataset(config: &ExperimentConfig) -> Result<LabeledDataset> {
    build_covariances(config)?.dataset().map_err(|e| e.in_stage("features"))
}

pub fn train_test(dataset: &LabeledDataset) -> (Samples, Samples) {
    (dataset.samples(Some(Split::Train)), dataset.samples(Some(Split::Test)))
}

/// Trains the configured learner on the training split, choosing γ on the
/// test split when a grid is configured.
pub fn train_learner(config: &ExperimentConfig, dataset: &LabeledDataset) -> Result<Fitted> {
    let (train, test) = train_test(dataset);
    fit_learner(&config.learner.spec(config.master_seed)?, &train, &test).map_err(|e| e.in_stage("training"))
}

/// Test-split error report of `model`.
pub fn evaluate_model(model: &Model, dataset: &LabeledDataset) -> Result<ErrorReport> {
    ErrorReport::evaluate(model, &dataset.samples(Some(Split::Test))).map_err(|e| e.in_stage("evaluation"))
}

pub fn compare(config: &ExperimentConfig, dataset: &LabeledDataset) -> Result<Comparison> {
    let (train, test) = train_test(dataset);
    compare_learners(
        &train,
        &test,
        &config.learner.elm_config(config.master_seed),
        &config.learner.gamma_values()?,
        config.learner.k,
    )
    .map_err(|e| e.in_stage("evaluation"))
}

/// Overrides for the configured sweep.
#[derive(Clone, Debug, Default)]
pub struct SweepRequest {
    pub axis: Option<SweepAxis>,
    pub grid: Option<String>,
    pub realizations: Option<usize>,
}

fn default_grid(axis: SweepAxis, train_len: usize, antennas: usize) -> Vec<f64> {
    match axis {
        SweepAxis::Neurons => [4, 2, 1].iter().map(|d| (train_len / d).max(1) as f64).chain([2.0 * train_len as f64, 4.0 * train_len as f64]).collect(),
        SweepAxis::Gamma => config::parse_grid("1e-6:1e2:log").expect("static grid"),
        SweepAxis::Antennas => [4usize, 8, 16, 32].iter().filter(|&&n| n < antennas).map(|&n| n as f64).chain([antennas as f64]).collect(),
        SweepAxis::Activation => Vec::new(),
    }
}

fn counts(grid: &[f64]) -> Result<Vec<usize>> {
    grid.iter()
        .map(|&v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("grid value {v} is not a positive integer")))
            }
        })
        .collect()
}

/// Runs a sweep. Antenna sweeps rebuild features from the window
/// covariances; the others reuse the full-array dataset.
pub fn run_sweep(config: &ExperimentConfig, request: &SweepRequest) -> Result<SweepResult> {
    let axis = request.axis.unwrap_or(config.sweep.axis);
    let realizations = request.realizations.unwrap_or(config.sweep.realizations);
    let grid_text = request.grid.clone().or_else(|| config.sweep.grid.clone());
    let grid = grid_text.as_deref().map(config::parse_grid).transpose()?;
    let inner = config.sweep.gamma_grid.as_deref().map_or(Ok(Vec::new()), config::parse_grid)?;
    let elm = config.learner.elm_config(config.master_seed);
    let provenance = config.provenance()?;
    let covs = build_covariances(config)?;
    let result = if axis == SweepAxis::Antennas {
        let grid = grid.unwrap_or_else(|| default_grid(axis, 0, covs.geometry.len()));
        sweep_antennas(&counts(&grid)?, &covs, &config.learner.spec(config.master_seed)?, provenance)
    } else {
        let ds = covs.dataset().map_err(|e| e.in_stage("features"))?;
        let (train, test) = train_test(&ds);
        let grid = grid.unwrap_or_else(|| default_grid(axis, train.len(), 0));
        match axis {
            SweepAxis::Neurons => sweep_neurons(&counts(&grid)?, &train, &test, &elm, &inner, realizations, provenance),
            SweepAxis::Gamma => sweep_gamma(&grid, &train, &test, &elm, realizations, provenance),
            _ => sweep_activation(&train, &test, &elm, &inner, realizations, provenance),
        }
    };
    result.map_err(|e| e.in_stage("sweep"))
}

/// Writes the sweep CSV and JSON summary into `dir`; returns both paths.
pub fn write_sweep(result: &SweepResult, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let stem = sweep_file_stem(result);
    let csv = dir.join(format!("{stem}.csv"));
    let json = dir.join(format!("{stem}.json"));
    fs::write(&csv, sweep_csv(result))?;
    fs::write(&json, sweep_json(result))?;
    Ok((csv, json))
}

pub fn histogram_csv(report: &ErrorReport, bin_width: f64, provenance: Provenance) -> Result<String> {
    let h = error_histogram(&report.errors(), bin_width)?;
    let mut out = format!(
        "# master_seed={}\n# config_hash={:016x}\nbin_start_m,bin_end_m,count\n",
        provenance.master_seed, provenance.config_hash
    );
    for (i, c) in h.counts.iter().enumerate() {
        out.push_str(&format!("{},{},{c}\n", i as f64 * bin_width, (i + 1) as f64 * bin_width));
    }
    Ok(out)
}

/// Files written by [`run_report`].
#[derive(Clone, Debug)]
pub struct ReportFiles {
    pub dataset: PathBuf,
    pub model: PathBuf,
    pub report: PathBuf,
    pub error_map: PathBuf,
    pub histogram: PathBuf,
}

/// Full run: builds the dataset, trains the configured learner, compares
/// ELM and K-nN on the test split, and writes every artifact into `dir`.
pub fn run_report(config: &ExperimentConfig, dir: &Path) -> Result<ReportFiles> {
    fs::create_dir_all(dir)?;
    let provenance = config.provenance()?;
    let ds = build_dataset(config)?;
    let files = ReportFiles {
        dataset: dir.join("dataset.bin"),
        model: dir.join("model.bin"),
        report: dir.join("report.txt"),
        error_map: dir.join("error_map.csv"),
        histogram: dir.join("error_histogram.csv"),
    };
    ds.save(&files.dataset)?;
    let fitted = train_learner(config, &ds)?;
    fs::write(&files.model, model_save(&fitted.model, provenance)?)?;
    let report = evaluate_model(&fitted.model, &ds)?;
    let comparison = compare(config, &ds)?;
    let label = match &fitted.model {
        Model::Elm(m) => format!("ELM ({})", m.activation()),
        Model::Knn(m) => format!("{}-nN", m.k()),
    };
    let mut text = evaluation_report(&label, &report, provenance);
    if let Some(g) = fitted.gamma {
        text.push_str(&format!("gamma {g:e}\n"));
    }
    text.push('\n');
    text.push_str(&comparison.table());
    fs::write(&files.report, text)?;
    let train_positions = ds.samples(Some(Split::Train)).positions;
    fs::write(&files.error_map, error_map_export(&report.per_sample, &train_positions, provenance))?;
    fs::write(&files.histogram, histogram_csv(&report, DEFAULT_BIN_WIDTH_M, provenance)?)?;
    Ok(files)
}
