//! Covariance features.
//!
//! A window of snapshots becomes a sample covariance `C = (1/S) Σ h h†`,
//! which is divided by its trace and flattened into `N²` reals: the real
//! upper triangle with the diagonal, then the imaginary strict upper
//! triangle, both in row-major order.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::scene::{ArrayGeometry, ChannelSnapshot, Polarization, Position2D};
use crate::{Error, Result, C64};

/// Tag of the frozen vectorization order, stored in dataset headers.
pub const ORDERING_VERSION: u32 = 1;

/// Hermitian sample covariance of one snapshot window.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleCovariance {
    pub matrix: DMatrix<C64>,
    pub snapshot_count: usize,
    pub ue_position: Position2D,
}

impl SampleCovariance {
    pub fn antenna_count(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|v| v.re).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub ue_position: Position2D,
}

pub fn feature_dim(antennas: usize) -> usize {
    antennas * antennas
}

/// Inverse of [`feature_dim`]; `None` when `m` is not a perfect square.
pub fn antennas_for_dim(m: usize) -> Option<usize> {
    let n = (m as f64).sqrt().round() as usize;
    (n * n == m).then_some(n)
}

pub fn sample_covariance(snapshots: &[ChannelSnapshot]) -> Result<SampleCovariance> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::InsufficientSnapshots("covariance needs at least one snapshot".into()))?;
    let n = first.h.len();
    let mut acc = DMatrix::<C64>::zeros(n, n);
    let (mut sx, mut sy) = (0.0, 0.0);
    for s in snapshots {
        if s.h.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "snapshot of length {} in a window of length {n}",
                s.h.len()
            )));
        }
        acc.ger(C64::new(1.0, 0.0), &s.h, &s.h.conjugate(), C64::new(1.0, 0.0));
        sx += s.ue_position.x;
        sy += s.ue_position.y;
    }
    let count = snapshots.len() as f64;
    acc /= C64::new(count, 0.0);
    // Symmetrize against accumulated rounding.
    let matrix = (&acc + acc.adjoint()) * C64::new(0.5, 0.0);
    Ok(SampleCovariance {
        matrix,
        snapshot_count: snapshots.len(),
        ue_position: Position2D::new(sx / count, sy / count),
    })
}

/// Flattens a Hermitian matrix without normalization.
pub fn vectorize_upper(matrix: &DMatrix<C64>) -> Vec<f64> {
    let n = matrix.nrows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in i..n {
            out.push(matrix[(i, j)].re);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            out.push(matrix[(i, j)].im);
        }
    }
    out
}

pub fn normalize_and_vectorize(cov: &SampleCovariance) -> Result<FeatureVector> {
    let tr = cov.trace();
    if !(tr > 0.0) {
        return Err(Error::ZeroCovariance);
    }
    let mut values = vectorize_upper(&cov.matrix);
    for v in values.iter_mut() {
        *v /= tr;
    }
    Ok(FeatureVector {
        values,
        ue_position: cov.ue_position,
    })
}

/// Rebuilds the Hermitian matrix encoded by a feature vector.
pub fn reconstruct(values: &[f64]) -> Result<DMatrix<C64>> {
    let n = antennas_for_dim(values.len()).ok_or_else(|| {
        Error::DimensionMismatch(format!("feature length {} is not a square", values.len()))
    })?;
    let mut m = DMatrix::<C64>::zeros(n, n);
    let mut it = values.iter();
    for i in 0..n {
        for j in i..n {
            m[(i, j)].re = *it.next().expect("length checked");
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            m[(i, j)].im = *it.next().expect("length checked");
        }
    }
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)].conj();
        }
    }
    Ok(m)
}

/// Principal submatrix on `indices` (in the given order).
pub fn restrict_features(cov: &SampleCovariance, indices: &[usize]) -> Result<SampleCovariance> {
    let n = cov.antenna_count();
    let mut seen = vec![false; n];
    for &i in indices {
        if i >= n {
            return Err(Error::InvalidSelection(format!("index {i} out of range for {n} antennas")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidSelection(format!("duplicate index {i}")));
        }
    }
    let k = indices.len();
    let matrix = DMatrix::from_fn(k, k, |r, c| cov.matrix[(indices[r], indices[c])]);
    Ok(SampleCovariance {
        matrix,
        snapshot_count: cov.snapshot_count,
        ue_position: cov.ue_position,
    })
}

/// Relative tolerance under which two candidate distances count as tied.
const TIE_TOLERANCE: f64 = 1e-9;

fn element_distance(g: &ArrayGeometry, a: usize, b: usize) -> f64 {
    let (p, q) = (&g.elements()[a].position_m, &g.elements()[b].position_m);
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

/// Greedy farthest-point antenna selection.
///
/// Starts from the lowest-indexed element of a farthest pair, then keeps
/// adding the element whose distance to the selected set is largest. Among
/// candidates tied within tolerance the one whose polarization differs from
/// the previously selected element wins, then the lowest index. Returns
/// sorted indices.
pub fn antenna_subset(geometry: &ArrayGeometry, target_count: usize) -> Result<Vec<usize>> {
    let n = geometry.len();
    if target_count == 0 || target_count > n {
        return Err(Error::InvalidSelection(format!(
            "target count {target_count} outside 1..={n}"
        )));
    }
    let mut diameter = 0.0f64;
    for a in 0..n {
        for b in a + 1..n {
            diameter = diameter.max(element_distance(geometry, a, b));
        }
    }
    let tol = TIE_TOLERANCE * diameter.max(f64::MIN_POSITIVE);
    let first = (0..n)
        .find(|&a| (0..n).any(|b| element_distance(geometry, a, b) >= diameter - tol))
        .expect("nonempty geometry");

    let mut selected = vec![first];
    let mut chosen = vec![false; n];
    chosen[first] = true;
    let mut min_dist: Vec<f64> = (0..n).map(|b| element_distance(geometry, first, b)).collect();

    while selected.len() < target_count {
        let best = (0..n)
            .filter(|&i| !chosen[i])
            .map(|i| min_dist[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let last_pol = geometry.elements()[*selected.last().unwrap()].polarization;
        let tied: Vec<usize> = (0..n)
            .filter(|&i| !chosen[i] && min_dist[i] >= best - tol)
            .collect();
        let pick = tied
            .iter()
            .copied()
            .find(|&i| geometry.elements()[i].polarization != last_pol)
            .unwrap_or(tied[0]);
        chosen[pick] = true;
        selected.push(pick);
        for (b, d) in min_dist.iter_mut().enumerate() {
            *d = d.min(element_distance(geometry, pick, b));
        }
    }
    selected.sort_unstable();
    Ok(selected)
}

/// Counts of each polarization tag among `indices`.
pub fn polarization_counts(geometry: &ArrayGeometry, indices: &[usize]) -> (usize, usize) {
    let a = indices
        .iter()
        .filter(|&&i| geometry.elements()[i].polarization == Polarization::A)
        .count();
    (a, indices.len() - a)
}

/// Per-dimension affine input scaling, `(x - mean) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Fits on the columns of `features` (M × T). Dimensions with zero
    /// spread keep unit scale.
    pub fn fit(features: &DMatrix<f64>) -> Result<Self> {
        let t = features.ncols();
        if t == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut mean = Vec::with_capacity(features.nrows());
        let mut scale = Vec::with_capacity(features.nrows());
        for row in features.row_iter() {
            let mu = row.iter().sum::<f64>() / t as f64;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / t as f64;
            let sd = var.sqrt();
            mean.push(mu);
            scale.push(if sd > 1e-12 { sd } else { 1.0 });
        }
        Ok(Self { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, features: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = features.clone();
        for (r, mut row) in out.row_iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v = (*v - self.mean[r]) / self.scale[r];
            }
        }
        out
    }

    pub fn apply_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(x.len(), x.iter().enumerate().map(|(i, v)| (v - self.mean[i]) / self.scale[i]))
    }
}
