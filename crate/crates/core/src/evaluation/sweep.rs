use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_learner, LearnerSpec};
use super::metrics::{dataset_mse, ErrorReport};
use super::monte_carlo::{monte_carlo_surface, realization_seeds, MseEstimate};
use crate::dataset::{CovarianceSet, Samples, Split};
use crate::features::antenna_subset;
use crate::learners::{Activation, ElmConfig, Provenance};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Neurons,
    Gamma,
    Antennas,
    Activation,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Neurons => "neurons",
            SweepAxis::Gamma => "gamma",
            SweepAxis::Antennas => "antennas",
            SweepAxis::Activation => "activation",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "neurons" => Ok(SweepAxis::Neurons),
            "gamma" => Ok(SweepAxis::Gamma),
            "antennas" => Ok(SweepAxis::Antennas),
            "activation" => Ok(SweepAxis::Activation),
            other => Err(Error::InvalidParameter(format!("unknown sweep axis '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Numeric value of the swept parameter (the activation tag on that axis).
    pub setting: f64,
    pub label: String,
    /// Regularization used at this point, if the learner is an ELM.
    pub gamma: Option<f64>,
    pub train: MseEstimate,
    pub test: MseEstimate,
    pub test_errors: Option<ErrorReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub provenance: Provenance,
    pub points: Vec<SweepPoint>,
}

fn check_increasing(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter(format!("empty {what} grid")));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter(format!("{what} grid must be strictly increasing")));
    }
    Ok(())
}

/// Effective inner γ grid: the given one, or just `config.gamma`.
fn inner_grid(config: &ElmConfig, gammas: &[f64]) -> Vec<f64> {
    if gammas.is_empty() {
        vec![config.gamma]
    } else {
        gammas.to_vec()
    }
}

fn best_point(setting: f64, label: String, config: &ElmConfig, train: &Samples, test: &Samples, gammas: &[f64], seeds: &[u64]) -> Result<SweepPoint> {
    let mut s = monte_carlo_surface(config, train, test, &inner_grid(config, gammas), seeds)?;
    let b = s.best();
    Ok(SweepPoint {
        setting,
        label,
        gamma: Some(s.gammas[b]),
        train: s.train.swap_remove(b),
        test: s.test.swap_remove(b),
        test_errors: None,
    })
}

/// Monte-Carlo train/test MSE per neuron count, with γ chosen per count as
/// the inner-grid argmin of the mean test MSE.
pub fn sweep_neurons(
    grid: &[usize],
    train: &Samples,
    test: &Samples,
    config: &ElmConfig,
    gammas: &[f64],
    realizations: usize,
    provenance: Provenance,
) -> Result<SweepResult> {
    check_increasing(&grid.iter().map(|&n| n as f64).collect::<Vec<_>>(), "neuron")?;
    let seeds = realization_seeds(provenance.master_seed, realizations);
    let points = grid
        .iter()
        .map(|&n| {
            let cfg = ElmConfig {
                neurons: n,
                ..config.clone()
            };
            best_point(n as f64, n.to_string(), &cfg, train, test, gammas, &seeds)
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        axis: SweepAxis::Neurons,
        provenance,
        points,
    })
}

/// Monte-Carlo train/test MSE at each γ of the grid.
pub fn sweep_gamma(
    grid: &[f64],
    train: &Samples,
    test: &Samples,
    config: &ElmConfig,
    realizations: usize,
    provenance: Provenance,
) -> Result<SweepResult> {
    check_increasing(grid, "gamma")?;
    let seeds = realization_seeds(provenance.master_seed, realizations);
    let s = monte_carlo_surface(config, train, test, grid, &seeds)?;
    let points = s
        .train
        .into_iter()
        .zip(s.test)
        .zip(grid)
        .map(|((tr, te), &g)| SweepPoint {
            setting: g,
            label: format!("{g:e}"),
            gamma: Some(g),
            train: tr,
            test: te,
            test_errors: None,
        })
        .collect();
    Ok(SweepResult {
        axis: SweepAxis::Gamma,
        provenance,
        points,
    })
}

/// Monte-Carlo train/test MSE for each activation, with per-activation γ selection.
pub fn sweep_activation(
    train: &Samples,
    test: &Samples,
    config: &ElmConfig,
    gammas: &[f64],
    realizations: usize,
    provenance: Provenance,
) -> Result<SweepResult> {
    let seeds = realization_seeds(provenance.master_seed, realizations);
    let points = Activation::ALL
        .iter()
        .map(|&a| {
            let cfg = ElmConfig {
                activation: a,
                ..config.clone()
            };
            best_point(a.tag() as f64, a.name().to_string(), &cfg, train, test, gammas, &seeds)
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        axis: SweepAxis::Activation,
        provenance,
        points,
    })
}

/// Fits `learner` and returns its γ, train MSE, test MSE and test error report.
pub fn evaluate_split(learner: &LearnerSpec, train: &Samples, test: &Samples) -> Result<(Option<f64>, f64, f64, ErrorReport)> {
    let fitted = fit_learner(learner, train, test)?;
    let train_mse = dataset_mse(&fitted.model, train)?;
    let test_mse = dataset_mse(&fitted.model, test)?;
    let report = ErrorReport::evaluate(&fitted.model, test)?;
    Ok((fitted.gamma, train_mse, test_mse, report))
}

/// Retrains `learner` on the features of the farthest-spread subset of each
/// antenna count and records the test localization errors.
pub fn sweep_antennas(grid: &[usize], data: &CovarianceSet, learner: &LearnerSpec, provenance: Provenance) -> Result<SweepResult> {
    check_increasing(&grid.iter().map(|&n| n as f64).collect::<Vec<_>>(), "antenna")?;
    if let Some(&n) = grid.iter().find(|&&n| n > data.geometry.len()) {
        return Err(Error::InvalidSelection(format!(
            "{n} antennas requested from an array of {}",
            data.geometry.len()
        )));
    }
    let points = grid
        .par_iter()
        .map(|&n| {
            let ds = data.restricted(&antenna_subset(&data.geometry, n)?)?;
            let (gamma, train_mse, test_mse, report) = evaluate_split(learner, &ds.samples(Some(Split::Train)), &ds.samples(Some(Split::Test)))?;
            Ok(SweepPoint {
                setting: n as f64,
                label: n.to_string(),
                gamma,
                train: MseEstimate::from_values(vec![train_mse])?,
                test: MseEstimate::from_values(vec![test_mse])?,
                test_errors: Some(report),
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        axis: SweepAxis::Antennas,
        provenance,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Position2D;
    use nalgebra::DMatrix;

    fn ramp(count: usize) -> Samples {
        let feats = DMatrix::from_fn(2, count, |r, j| if r == 0 { j as f64 / count as f64 } else { 0.5 });
        Samples::new(feats, (0..count).map(|j| Position2D::new(j as f64, 1.0)).collect()).unwrap()
    }

    #[test]
    fn axis_names_round_trip() {
        for a in [SweepAxis::Neurons, SweepAxis::Gamma, SweepAxis::Antennas, SweepAxis::Activation] {
            assert_eq!(a.name().parse::<SweepAxis>().unwrap(), a);
        }
        assert!("width".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn single_point_grid() {
        let s = ramp(12);
        let r = sweep_neurons(&[8], &s, &s, &ElmConfig { neurons: 1, ..Default::default() }, &[1e-3], 2, Provenance::default()).unwrap();
        assert_eq!(r.points.len(), 1);
        assert_eq!(r.points[0].setting, 8.0);
        assert_eq!(r.points[0].train.realizations, 2);
    }

    #[test]
    fn grids_must_increase() {
        let s = ramp(6);
        let cfg = ElmConfig { neurons: 4, ..Default::default() };
        assert!(sweep_neurons(&[], &s, &s, &cfg, &[], 2, Provenance::default()).is_err());
        assert!(sweep_neurons(&[4, 4], &s, &s, &cfg, &[], 2, Provenance::default()).is_err());
        assert!(sweep_gamma(&[1.0, 0.1], &s, &s, &cfg, 2, Provenance::default()).is_err());
    }

    #[test]
    fn activation_sweep_covers_table() {
        let s = ramp(10);
        let cfg = ElmConfig { neurons: 6, ..Default::default() };
        let r = sweep_activation(&s, &s, &cfg, &[1e-2, 1.0], 2, Provenance::default()).unwrap();
        let labels: Vec<_> = r.points.iter().map(|p| p.label.as_str()).collect();
        assert_eq!(labels, ["ReLu", "Step", "Sign"]);
    }
}
