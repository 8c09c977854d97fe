use std::cmp::Ordering;

use nalgebra::DMatrix;

use super::Regressor;
use crate::{Error, Position2D, Result};

/// K-nearest-neighbors barycenter regressor under the Euclidean distance.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnModel {
    features: DMatrix<f64>,
    positions: Vec<Position2D>,
    k: usize,
}

impl KnnModel {
    /// `features` holds one training sample per column (M × T).
    pub fn new(features: DMatrix<f64>, positions: Vec<Position2D>, k: usize) -> Result<Self> {
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
        if k == 0 || k > positions.len() {
            return Err(Error::InvalidParameter(format!(
                "k must lie in 1..={}, got {k}",
                positions.len()
            )));
        }
        Ok(Self { features, positions, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn positions(&self) -> &[Position2D] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Indices of the `k` nearest training samples, nearest first; equal
    /// distances go to the lower training index.
    pub fn neighbors(&self, x: &[f64]) -> Result<Vec<usize>> {
        if x.len() != self.features.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} inputs, got {}",
                self.features.nrows(),
                x.len()
            )));
        }
        let mut dist: Vec<(f64, usize)> = self
            .features
            .column_iter()
            .enumerate()
            .map(|(j, col)| {
                let d2: f64 = col.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2.sqrt(), j)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| -> Ordering { a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)) };
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, order);
            dist.truncate(self.k);
        }
        dist.sort_unstable_by(order);
        Ok(dist.into_iter().map(|(_, j)| j).collect())
    }
}

impl Regressor for KnnModel {
    fn input_dim(&self) -> usize {
        self.features.nrows()
    }

    fn predict(&self, x: &[f64]) -> Result<Position2D> {
        let idx = self.neighbors(x)?;
        let (mut sx, mut sy) = (0.0, 0.0);
        for &j in &idx {
            sx += self.positions[j].x;
            sy += self.positions[j].y;
        }
        let k = idx.len() as f64;
        Ok(Position2D::new(sx / k, sy / k))
    }
}
