use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ridge::{ridge_solve, RidgeForm, RidgePath};
use super::{targets, Regressor};
use crate::features::Standardizer;
use crate::{seed, Error, Position2D, Result};

/// Hidden-layer nonlinearity. Step and Sign count zero as nonnegative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Step,
    Sign,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Relu, Activation::Step, Activation::Sign];

    #[inline]
    pub fn apply(self, t: f64) -> f64 {
        match self {
            Activation::Relu => t.max(0.0),
            Activation::Step => {
                if t >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sign => {
                if t >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 1,
            Activation::Step => 2,
            Activation::Sign => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "ReLu",
            Activation::Step => "Step",
            Activation::Sign => "Sign",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "step" => Ok(Activation::Step),
            "sign" => Ok(Activation::Sign),
            other => Err(Error::InvalidParameter(format!("unknown activation '{other}'"))),
        }
    }
}

/// Hyperparameters of an extreme learning machine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElmConfig {
    pub neurons: usize,
    pub activation: Activation,
    pub gamma: f64,
    pub seed: u64,
    #[serde(default)]
    pub standardize_inputs: bool,
}

impl Default for ElmConfig {
    fn default() -> Self {
        Self {
            neurons: 10_000,
            activation: Activation::Relu,
            gamma: 1e-3,
            seed: 0,
            standardize_inputs: false,
        }
    }
}

/// Single-hidden-layer network `x ↦ βᵀ φ(W x)` with random `W` (n × M)
/// and ridge-trained `β` (n × 2).
#[derive(Clone, Debug, PartialEq)]
pub struct ElmModel {
    weights: DMatrix<f64>,
    activation: Activation,
    gamma: f64,
    seed: u64,
    standardize_inputs: bool,
    standardizer: Option<Standardizer>,
    beta: Option<DMatrix<f64>>,
}

impl ElmModel {
    /// Untrained model with `W` drawn i.i.d. standard normal from `seed`.
    pub fn init(neurons: usize, input_dim: usize, seed: u64, activation: Activation, gamma: f64) -> Result<Self> {
        if neurons < 1 || input_dim < 1 {
            return Err(Error::InvalidParameter(format!(
                "need at least one neuron and one input, got n={neurons}, M={input_dim}"
            )));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be nonnegative, got {gamma}")));
        }
        Ok(Self {
            weights: Self::draw_weights(neurons, input_dim, seed),
            activation,
            gamma,
            seed,
            standardize_inputs: false,
            standardizer: None,
            beta: None,
        })
    }

    pub fn from_config(config: &ElmConfig, input_dim: usize) -> Result<Self> {
        let mut m = Self::init(config.neurons, input_dim, config.seed, config.activation, config.gamma)?;
        m.standardize_inputs = config.standardize_inputs;
        Ok(m)
    }

    /// The n × M weight matrix for `seed`, filled neuron by neuron.
    pub fn draw_weights(neurons: usize, input_dim: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seed::stream(seed);
        let mut w = DMatrix::zeros(neurons, input_dim);
        for i in 0..neurons {
            for j in 0..input_dim {
                w[(i, j)] = StandardNormal.sample(&mut rng);
            }
        }
        w
    }

    pub fn neurons(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn beta(&self) -> Option<&DMatrix<f64>> {
        self.beta.as_ref()
    }

    pub fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    pub fn is_trained(&self) -> bool {
        self.beta.is_some()
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be nonnegative, got {gamma}")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub(super) fn from_parts(
        weights: DMatrix<f64>,
        activation: Activation,
        gamma: f64,
        seed: u64,
        standardizer: Option<Standardizer>,
        beta: Option<DMatrix<f64>>,
    ) -> Self {
        Self {
            weights,
            activation,
            gamma,
            seed,
            standardize_inputs: standardizer.is_some(),
            standardizer,
            beta,
        }
    }

    fn check_inputs(&self, features: &DMatrix<f64>) -> Result<()> {
        if features.nrows() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} inputs, got {}",
                self.input_dim(),
                features.nrows()
            )));
        }
        Ok(())
    }

    /// Hidden-layer outputs `φ(W x_j)` for every column of `features`
    /// (M × T), as an n × T matrix.
    pub fn hidden(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_inputs(features)?;
        let mut pre = match &self.standardizer {
            Some(s) => &self.weights * s.apply(features),
            None => &self.weights * features,
        };
        let act = self.activation;
        pre.apply(|v| *v = act.apply(*v));
        Ok(pre)
    }

    /// Fits `β` on the columns of `features` (M × T) and their positions.
    pub fn train(self, features: &DMatrix<f64>, positions: &[Position2D]) -> Result<Self> {
        self.train_with(features, positions, RidgeForm::Auto)
    }

    pub fn train_with(mut self, features: &DMatrix<f64>, positions: &[Position2D], form: RidgeForm) -> Result<Self> {
        self.prepare(features, positions)?;
        let sigma = self.hidden(features)?;
        self.beta = Some(ridge_solve(&sigma, &targets(positions), self.gamma, form)?);
        Ok(self)
    }

    /// Computes the hidden outputs and Gram matrix once so the readout can be
    /// solved at several regularization levels.
    pub fn path(mut self, features: &DMatrix<f64>, positions: &[Position2D]) -> Result<ElmPath> {
        self.prepare(features, positions)?;
        let sigma = self.hidden(features)?;
        let ridge = RidgePath::new(sigma, &targets(positions), RidgeForm::Auto)?;
        self.beta = None;
        Ok(ElmPath { model: self, ridge })
    }

    /// Trains one copy of the model per regularization level.
    pub fn train_path(self, features: &DMatrix<f64>, positions: &[Position2D], gammas: &[f64]) -> Result<Vec<Self>> {
        let path = self.path(features, positions)?;
        gammas.iter().map(|&g| path.trained(g)).collect()
    }

    fn prepare(&mut self, features: &DMatrix<f64>, positions: &[Position2D]) -> Result<()> {
        self.check_inputs(features)?;
        if features.ncols() == 0 {
            return Err(Error::EmptyDataset);
        }
        if features.ncols() != positions.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature columns but {} positions",
                features.ncols(),
                positions.len()
            )));
        }
        self.standardizer = if self.standardize_inputs {
            Some(Standardizer::fit(features)?)
        } else {
            None
        };
        Ok(())
    }

    /// Predictions `βᵀ φ(W x)` from precomputed hidden outputs (n × T).
    pub fn predict_hidden(&self, hidden: &DMatrix<f64>) -> Result<Vec<Position2D>> {
        let beta = self.beta.as_ref().ok_or(Error::Untrained)?;
        Ok(readout(beta, hidden))
    }
}

/// `βᵀ H` for a readout `β` (n × 2) and hidden outputs `H` (n × T).
pub fn readout(beta: &DMatrix<f64>, hidden: &DMatrix<f64>) -> Vec<Position2D> {
    let out = beta.transpose() * hidden;
    out.column_iter().map(|c| Position2D::new(c[0], c[1])).collect()
}

/// An ELM with its training hidden outputs and Gram matrix cached.
pub struct ElmPath {
    model: ElmModel,
    ridge: RidgePath,
}

impl ElmPath {
    /// The untrained model (input scaling already fitted).
    pub fn model(&self) -> &ElmModel {
        &self.model
    }

    /// Training hidden outputs (n × T).
    pub fn train_hidden(&self) -> &DMatrix<f64> {
        self.ridge.sigma()
    }

    pub fn beta(&self, gamma: f64) -> Result<DMatrix<f64>> {
        self.ridge.solve(gamma)
    }

    pub fn trained(&self, gamma: f64) -> Result<ElmModel> {
        let beta = self.beta(gamma)?;
        let mut m = self.model.clone().with_gamma(gamma)?;
        m.beta = Some(beta);
        Ok(m)
    }
}

impl Regressor for ElmModel {
    fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    fn predict(&self, x: &[f64]) -> Result<Position2D> {
        let col = DMatrix::from_column_slice(x.len(), 1, x);
        Ok(self.predict_batch(&col)?[0])
    }

    fn predict_batch(&self, features: &DMatrix<f64>) -> Result<Vec<Position2D>> {
        if self.beta.is_none() {
            return Err(Error::Untrained);
        }
        self.predict_hidden(&self.hidden(features)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use nalgebra::DVector;
    use rand::Rng as _;

    fn hidden_vec(model: &ElmModel, x: &DVector<f64>) -> DVector<f64> {
        let act = model.activation;
        (&model.weights * x).map(|v| act.apply(v))
    }

    #[test]
    fn activation_table() {
        assert_eq!(Activation::Relu.apply(-3.0), 0.0);
        assert_eq!(Activation::Relu.apply(2.5), 2.5);
        assert_eq!(Activation::Step.apply(0.0), 1.0);
        assert_eq!(Activation::Sign.apply(0.0), 1.0);
        assert_eq!(Activation::Sign.apply(-0.1), -1.0);
        assert_eq!(Activation::Step.apply(-0.1), 0.0);
        for a in Activation::ALL {
            assert_eq!(Activation::from_tag(a.tag()), Some(a));
            assert_eq!(a.name().parse::<Activation>().unwrap(), a);
        }
    }

    #[test]
    fn init_is_deterministic() {
        let a = ElmModel::init(20, 7, 42, Activation::Relu, 0.1).unwrap();
        let b = ElmModel::init(20, 7, 42, Activation::Relu, 0.1).unwrap();
        assert_eq!(a.weights().as_slice(), b.weights().as_slice());
        let c = ElmModel::init(20, 7, 43, Activation::Relu, 0.1).unwrap();
        assert_ne!(a.weights(), c.weights());
        let one = ElmModel::init(1, 1, 3, Activation::Relu, 0.0).unwrap();
        assert_eq!(one.weights().shape(), (1, 1));
    }

    #[test]
    fn init_rejects_empty_shapes() {
        assert!(ElmModel::init(0, 5, 1, Activation::Relu, 0.1).is_err());
        assert!(ElmModel::init(5, 0, 1, Activation::Relu, 0.1).is_err());
    }

    #[test]
    fn weight_moments_at_full_scale() {
        let (n, m) = (10_000usize, 3136usize);
        let w = ElmModel::draw_weights(n, m, 9);
        assert_eq!(w.shape(), (n, m));
        let count = (n * m) as f64;
        let mean = w.iter().sum::<f64>() / count;
        let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
        assert!(mean.abs() < 3.0 / count.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    fn random_instance(m: usize, t: usize, seed_: u64) -> (DMatrix<f64>, Vec<Position2D>) {
        let mut rng = seed::stream(seed_);
        let x = DMatrix::from_fn(m, t, |_, _| rng.random_range(-1.0..1.0));
        let y = (0..t)
            .map(|_| Position2D::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)))
            .collect();
        (x, y)
    }

    #[test]
    fn huge_gamma_collapses_beta() {
        let (x, y) = random_instance(5, 30, 1);
        let m = ElmModel::init(12, 5, 2, Activation::Relu, 1e12).unwrap().train(&x, &y).unwrap();
        assert!(m.beta().unwrap().iter().all(|b| b.abs() < 1e-6));
    }

    #[test]
    fn square_system_interpolates() {
        // Positive inputs and weights keep ReLu in its linear regime.
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 1.0]);
        let y = vec![Position2D::new(3.0, -1.0), Position2D::new(-7.0, 12.0)];
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.25, 2.0]);
        let model = ElmModel::from_parts(w, Activation::Relu, 0.0, 0, None, None)
            .train(&x, &y)
            .unwrap();
        for (j, want) in y.iter().enumerate() {
            let got = model.predict(x.column(j).as_slice()).unwrap();
            assert!(got.distance(want) < 1e-8, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn zero_input_predictions() {
        let (x, y) = random_instance(4, 10, 3);
        let relu = ElmModel::init(6, 4, 4, Activation::Relu, 0.1).unwrap().train(&x, &y).unwrap();
        assert_eq!(relu.predict(&[0.0; 4]).unwrap(), Position2D::new(0.0, 0.0));
        let step = ElmModel::init(6, 4, 4, Activation::Step, 0.1).unwrap().train(&x, &y).unwrap();
        let beta = step.beta().unwrap();
        let p = step.predict(&[0.0; 4]).unwrap();
        assert!((p.x - beta.column(0).sum()).abs() < 1e-9);
        assert!((p.y - beta.column(1).sum()).abs() < 1e-9);
    }

    #[test]
    fn untrained_prediction_fails() {
        let m = ElmModel::init(3, 2, 1, Activation::Relu, 0.1).unwrap();
        assert!(matches!(m.predict(&[0.0, 1.0]), Err(Error::Untrained)));
    }

    #[test]
    fn dimension_checks() {
        let (x, y) = random_instance(4, 10, 3);
        let m = ElmModel::init(6, 5, 4, Activation::Relu, 0.1).unwrap();
        assert!(matches!(m.clone().train(&x, &y), Err(Error::DimensionMismatch(_))));
        let m = ElmModel::init(6, 4, 4, Activation::Relu, 0.1).unwrap();
        assert!(matches!(m.train(&x, &y[..9]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn gamma_zero_singular_system_requires_regularization() {
        // Two identical samples make the dual Gram matrix singular.
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.5, 0.5]);
        let y = vec![Position2D::new(1.0, 0.0), Position2D::new(2.0, 0.0)];
        let m = ElmModel::init(8, 2, 5, Activation::Relu, 0.0).unwrap();
        assert!(matches!(m.train(&x, &y), Err(Error::RegularizationRequired(_))));
    }

    #[test]
    fn primal_dual_and_normal_equations() {
        for s in 0..5u64 {
            let (x, y) = random_instance(10, 40, 100 + s);
            let base = ElmModel::init(25, 10, 200 + s, Activation::Relu, 0.3).unwrap();
            let p = base.clone().train_with(&x, &y, RidgeForm::Primal).unwrap();
            let d = base.clone().train_with(&x, &y, RidgeForm::Dual).unwrap();
            let (bp, bd) = (p.beta().unwrap(), d.beta().unwrap());
            assert!((bp - bd).norm() <= 1e-8 * bp.norm());

            let sigma = base.hidden(&x).unwrap();
            let rhs = &sigma * targets(&y);
            let mut a = &sigma * sigma.transpose();
            for i in 0..a.nrows() {
                a[(i, i)] += 0.3;
            }
            assert!((a * bd - &rhs).norm() <= 1e-8 * rhs.norm());
        }
    }

    #[test]
    fn path_matches_individual_training() {
        let (x, y) = random_instance(6, 20, 7);
        let base = ElmModel::init(30, 6, 8, Activation::Sign, 1.0).unwrap();
        let gammas = [0.01, 0.1, 1.0];
        let path = base.clone().train_path(&x, &y, &gammas).unwrap();
        for (m, &g) in path.iter().zip(&gammas) {
            let single = base.clone().with_gamma(g).unwrap().train(&x, &y).unwrap();
            assert!((m.beta().unwrap() - single.beta().unwrap()).norm() < 1e-9 * single.beta().unwrap().norm());
        }
    }

    #[test]
    fn shrinkage_is_monotone() {
        let (x, y) = random_instance(8, 30, 9);
        let gammas = [1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0];
        let models = ElmModel::init(40, 8, 10, Activation::Relu, 0.0)
            .unwrap()
            .train_path(&x, &y, &gammas)
            .unwrap();
        let norms: Vec<f64> = models.iter().map(|m| m.beta().unwrap().norm()).collect();
        for w in norms.windows(2) {
            assert!(w[0] >= w[1], "{norms:?}");
        }
    }

    #[test]
    fn standardized_inputs_are_used_consistently() {
        let (x, y) = random_instance(5, 25, 12);
        let cfg = ElmConfig {
            neurons: 15,
            activation: Activation::Relu,
            gamma: 0.1,
            seed: 13,
            standardize_inputs: true,
        };
        let m = ElmModel::from_config(&cfg, 5).unwrap().train(&x, &y).unwrap();
        let s = m.standardizer().unwrap();
        let manual = hidden_vec(&m, &s.apply_vec(&x.column(0).into_owned()));
        let beta = m.beta().unwrap();
        let want = beta.transpose() * manual;
        let got = m.predict(x.column(0).as_slice()).unwrap();
        assert!((got.x - want[0]).abs() < 1e-9 && (got.y - want[1]).abs() < 1e-9);
    }
}
