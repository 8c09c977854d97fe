//! Ridge readout solves for hidden-layer outputs.
//!
//! With hidden outputs `Σ` (n × T) and targets `Y` (T × 2), the readout
//! `β` (n × 2) minimizes `‖Σᵀβ − Y‖² + γ‖β‖²`. It is computed either from
//! the n × n primal system `(ΣΣᵀ + γI) β = Σ Y`, or from the T × T dual
//! system `(ΣᵀΣ + γI) α = Y` followed by `β = Σ α`.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RidgeForm {
    /// Dual when `T < n`, primal otherwise.
    Auto,
    Primal,
    Dual,
}

impl RidgeForm {
    pub fn resolve(self, neurons: usize, samples: usize) -> RidgeForm {
        match self {
            RidgeForm::Auto if samples < neurons => RidgeForm::Dual,
            RidgeForm::Auto => RidgeForm::Primal,
            f => f,
        }
    }
}

/// Pivot floor relative to the largest diagonal entry; below it the system is
/// treated as singular.
const PIVOT_FLOOR: f64 = 1e-13;

/// Cholesky solve of `(gram + γI) X = rhs`.
pub fn spd_solve(gram: &DMatrix<f64>, gamma: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be nonnegative, got {gamma}")));
    }
    let mut a = gram.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += gamma;
    }
    let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let chol: Cholesky<f64, Dyn> = Cholesky::new(a).ok_or(Error::RegularizationRequired(gamma))?;
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
    if !(min_pivot > PIVOT_FLOOR * scale) {
        return Err(Error::RegularizationRequired(gamma));
    }
    Ok(chol.solve(rhs))
}

/// Precomputed Gram matrix for solving the same ridge problem at several
/// regularization levels.
pub struct RidgePath {
    sigma: DMatrix<f64>,
    form: RidgeForm,
    gram: DMatrix<f64>,
    rhs: DMatrix<f64>,
}

impl RidgePath {
    pub fn new(sigma: DMatrix<f64>, targets: &DMatrix<f64>, form: RidgeForm) -> Result<Self> {
        let (n, t) = sigma.shape();
        if targets.nrows() != t {
            return Err(Error::DimensionMismatch(format!(
                "{} targets for {t} hidden-output columns",
                targets.nrows()
            )));
        }
        if t == 0 {
            return Err(Error::EmptyDataset);
        }
        let form = form.resolve(n, t);
        let st = sigma.transpose();
        let (gram, rhs) = match form {
            RidgeForm::Dual => (&st * &sigma, targets.clone()),
            _ => (&sigma * &st, &sigma * targets),
        };
        Ok(Self { sigma, form, gram, rhs })
    }

    /// Hidden outputs the path was built from (n × T).
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn form(&self) -> RidgeForm {
        self.form
    }

    pub fn solve(&self, gamma: f64) -> Result<DMatrix<f64>> {
        let x = spd_solve(&self.gram, gamma, &self.rhs)?;
        Ok(match self.form {
            RidgeForm::Dual => &self.sigma * x,
            _ => x,
        })
    }
}

pub fn ridge_solve(sigma: &DMatrix<f64>, targets: &DMatrix<f64>, gamma: f64, form: RidgeForm) -> Result<DMatrix<f64>> {
    RidgePath::new(sigma.clone(), targets, form)?.solve(gamma)
}
