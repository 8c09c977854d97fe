use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::mse;
use crate::dataset::Samples;
use crate::learners::{readout, ElmConfig, ElmModel};
use crate::{seed, Error, Result};

/// Mean of a per-realization MSE sample and its standard error (m²).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseEstimate {
    pub mean_mse: f64,
    /// Sample standard deviation over realizations divided by √R; zero when R = 1.
    pub std_error: f64,
    pub realizations: usize,
    pub per_realization: Vec<f64>,
}

impl MseEstimate {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("an estimate needs at least one realization".into()));
        }
        let r = values.len() as f64;
        let mean = values.iter().sum::<f64>() / r;
        let std_error = if values.len() < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
            (var / r).sqrt()
        };
        Ok(Self {
            mean_mse: mean,
            std_error,
            realizations: values.len(),
            per_realization: values,
        })
    }

    /// Square root of the mean MSE, in meters.
    pub fn root(&self) -> f64 {
        self.mean_mse.sqrt()
    }
}

/// Seeds for `count` independent draws of `W` under `master`.
pub fn realization_seeds(master: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|r| seed::derive(master, "elm-weights", r)).collect()
}

/// Train and test MSE estimates over a grid of regularization levels, sharing
/// each realization's hidden layer across the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaSurface {
    pub gammas: Vec<f64>,
    pub train: Vec<MseEstimate>,
    pub test: Vec<MseEstimate>,
}

impl GammaSurface {
    /// Grid index of the lowest mean test MSE; the first one on ties.
    pub fn best(&self) -> usize {
        let mut best = 0;
        for (i, t) in self.test.iter().enumerate() {
            if t.mean_mse < self.test[best].mean_mse {
                best = i;
            }
        }
        best
    }
}

/// One realization: per-γ train and test MSE of an ELM whose `W` comes from `weight_seed`.
fn realization(config: &ElmConfig, train: &Samples, test: &Samples, gammas: &[f64], weight_seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let cfg = ElmConfig {
        seed: weight_seed,
        ..config.clone()
    };
    let path = ElmModel::from_config(&cfg, train.dim())?.path(&train.features, &train.positions)?;
    let test_hidden = path.model().hidden(&test.features)?;
    let mut tr = Vec::with_capacity(gammas.len());
    let mut te = Vec::with_capacity(gammas.len());
    for &g in gammas {
        let beta = path.beta(g)?;
        tr.push(mse(&train.positions, &readout(&beta, path.train_hidden()))?);
        te.push(mse(&test.positions, &readout(&beta, &test_hidden))?);
    }
    Ok((tr, te))
}

/// Monte-Carlo train/test MSE over `gammas` with one realization per seed.
pub fn monte_carlo_surface(
    config: &ElmConfig,
    train: &Samples,
    test: &Samples,
    gammas: &[f64],
    seeds: &[u64],
) -> Result<GammaSurface> {
    if gammas.is_empty() {
        return Err(Error::InvalidParameter("empty gamma grid".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("need at least one realization".into()));
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let runs: Vec<(Vec<f64>, Vec<f64>)> = seeds
        .par_iter()
        .map(|&s| realization(config, train, test, gammas, s))
        .collect::<Result<_>>()?;
    let column = |pick: fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>, g: usize| -> Result<MseEstimate> {
        MseEstimate::from_values(runs.iter().map(|r| pick(r)[g]).collect())
    };
    let mut train_est = Vec::with_capacity(gammas.len());
    let mut test_est = Vec::with_capacity(gammas.len());
    for g in 0..gammas.len() {
        train_est.push(column(|r| &r.0, g)?);
        test_est.push(column(|r| &r.1, g)?);
    }
    Ok(GammaSurface {
        gammas: gammas.to_vec(),
        train: train_est,
        test: test_est,
    })
}

/// Train and test MSE estimates at `config.gamma` with `W` drawn from each of `seeds`.
pub fn monte_carlo_mse_seeds(config: &ElmConfig, train: &Samples, test: &Samples, seeds: &[u64]) -> Result<(MseEstimate, MseEstimate)> {
    let mut s = monte_carlo_surface(config, train, test, &[config.gamma], seeds)?;
    Ok((s.train.remove(0), s.test.remove(0)))
}

/// Estimates the expectation over `W` of the train and test MSE from
/// `realizations` independent draws derived from `master_seed`.
pub fn monte_carlo_mse(
    config: &ElmConfig,
    train: &Samples,
    test: &Samples,
    realizations: usize,
    master_seed: u64,
) -> Result<(MseEstimate, MseEstimate)> {
    if realizations < 2 {
        return Err(Error::InvalidParameter(format!("need R ≥ 2 realizations, got {realizations}")));
    }
    monte_carlo_mse_seeds(config, train, test, &realization_seeds(master_seed, realizations))
}
