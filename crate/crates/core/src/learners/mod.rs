//! Position regressors over covariance features.

mod elm;
mod knn;
mod model_io;
pub mod ridge;

pub use elm::{readout, Activation, ElmConfig, ElmModel, ElmPath};
pub use knn::KnnModel;
pub use model_io::{model_load, model_save, Model, Provenance, BETA_LAYOUT_VERSION, MODEL_FORMAT_VERSION};
pub use ridge::RidgeForm;

use nalgebra::DMatrix;

use crate::{Position2D, Result};

/// Anything that maps a feature vector to a position.
pub trait Regressor {
    fn input_dim(&self) -> usize;

    fn predict(&self, x: &[f64]) -> Result<Position2D>;

    /// Predicts every column of `features` (M × T).
    fn predict_batch(&self, features: &DMatrix<f64>) -> Result<Vec<Position2D>> {
        features
            .column_iter()
            .map(|c| self.predict(c.as_slice()))
            .collect()
    }
}

/// Packs positions into a T × 2 target matrix.
pub fn targets(positions: &[Position2D]) -> DMatrix<f64> {
    DMatrix::from_fn(positions.len(), 2, |j, c| if c == 0 { positions[j].x } else { positions[j].y })
}
