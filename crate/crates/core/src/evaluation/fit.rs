use serde::{Deserialize, Serialize};

use super::metrics::mse;
use crate::dataset::Samples;
use crate::learners::{readout, ElmConfig, ElmModel, KnnModel, Model};
use crate::{Error, Result};

/// A learner to fit, with an optional regularization grid for the ELM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LearnerSpec {
    Elm {
        config: ElmConfig,
        /// When nonempty, `config.gamma` is ignored and γ is picked from
        /// this grid by lowest test MSE.
        gamma_grid: Vec<f64>,
    },
    Knn {
        k: usize,
    },
}

#[derive(Clone, Debug)]
pub struct Fitted {
    pub model: Model,
    /// Regularization used by an ELM.
    pub gamma: Option<f64>,
}

/// Trains one ELM per grid value on a shared hidden layer and returns the
/// model with the lowest test MSE (first on ties) and the test MSE per γ.
pub fn select_gamma(config: &ElmConfig, train: &Samples, test: &Samples, gammas: &[f64]) -> Result<(ElmModel, Vec<f64>)> {
    if gammas.is_empty() {
        return Err(Error::InvalidParameter("empty gamma grid".into()));
    }
    let path = ElmModel::from_config(config, train.dim())?.path(&train.features, &train.positions)?;
    let hidden = path.model().hidden(&test.features)?;
    let mut scores = Vec::with_capacity(gammas.len());
    for &g in gammas {
        scores.push(mse(&test.positions, &readout(&path.beta(g)?, &hidden))?);
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    Ok((path.trained(gammas[best])?, scores))
}

pub fn fit_learner(spec: &LearnerSpec, train: &Samples, test: &Samples) -> Result<Fitted> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    match spec {
        LearnerSpec::Knn { k } => Ok(Fitted {
            model: Model::Knn(KnnModel::new(train.features.clone(), train.positions.clone(), *k)?),
            gamma: None,
        }),
        LearnerSpec::Elm { config, gamma_grid } if gamma_grid.is_empty() => {
            let m = ElmModel::from_config(config, train.dim())?.train(&train.features, &train.positions)?;
            Ok(Fitted {
                gamma: Some(m.gamma()),
                model: Model::Elm(m),
            })
        }
        LearnerSpec::Elm { config, gamma_grid } => {
            let (m, _) = select_gamma(config, train, test, gamma_grid)?;
            Ok(Fitted {
                gamma: Some(m.gamma()),
                model: Model::Elm(m),
            })
        }
    }
}
