use serde::{Deserialize, Serialize};

use crate::dataset::Samples;
use crate::learners::Regressor;
use crate::{Error, Position2D, Result};

/// Euclidean distance between the true and the estimated position, in meters.
pub fn localization_error(truth: Position2D, estimate: Position2D) -> f64 {
    truth.distance(&estimate)
}

/// Per-sample localization errors and their summary statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// True position and error for each evaluated sample, in input order.
    pub per_sample: Vec<(Position2D, f64)>,
    pub average: f64,
    pub median: f64,
    pub maximum: f64,
    pub rmse: f64,
}

impl ErrorReport {
    pub fn from_predictions(truth: &[Position2D], estimates: &[Position2D]) -> Result<Self> {
        if truth.len() != estimates.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} true positions but {} estimates",
                truth.len(),
                estimates.len()
            )));
        }
        let per_sample = truth
            .iter()
            .zip(estimates)
            .map(|(t, e)| (*t, localization_error(*t, *e)))
            .collect();
        Self::from_errors(per_sample)
    }

    pub fn from_errors(per_sample: Vec<(Position2D, f64)>) -> Result<Self> {
        if per_sample.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = per_sample.len() as f64;
        let mut sorted: Vec<f64> = per_sample.iter().map(|p| p.1).collect();
        let average = sorted.iter().sum::<f64>() / n;
        let rmse = (sorted.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        let maximum = sorted[sorted.len() - 1];
        Ok(Self {
            per_sample,
            average,
            median,
            maximum,
            rmse,
        })
    }

    /// Evaluates `model` on every sample of `set`.
    pub fn evaluate(model: &dyn Regressor, set: &Samples) -> Result<Self> {
        let est = model.predict_batch(&set.features)?;
        Self::from_predictions(&set.positions, &est)
    }

    pub fn errors(&self) -> Vec<f64> {
        self.per_sample.iter().map(|p| p.1).collect()
    }

    pub fn len(&self) -> usize {
        self.per_sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_sample.is_empty()
    }
}

/// Mean squared localization error between label and estimate lists (m²).
pub fn mse(truth: &[Position2D], estimates: &[Position2D]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if truth.len() != estimates.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} true positions but {} estimates",
            truth.len(),
            estimates.len()
        )));
    }
    let sum: f64 = truth
        .iter()
        .zip(estimates)
        .map(|(t, e)| (t.x - e.x).powi(2) + (t.y - e.y).powi(2))
        .sum();
    Ok(sum / truth.len() as f64)
}

/// Mean squared error of `model` over `set`, in m².
pub fn dataset_mse(model: &dyn Regressor, set: &Samples) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let est = model.predict_batch(&set.features)?;
    mse(&set.positions, &est)
}

/// Fixed-width error histogram; bin `i` covers `[i·w, (i+1)·w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin-wise sum; both histograms must share the bin width.
    pub fn merge(&self, other: &Histogram) -> Result<Histogram> {
        if self.bin_width != other.bin_width {
            return Err(Error::InvalidParameter(format!(
                "bin widths differ: {} vs {}",
                self.bin_width, other.bin_width
            )));
        }
        let len = self.counts.len().max(other.counts.len());
        let counts = (0..len)
            .map(|i| self.counts.get(i).copied().unwrap_or(0) + other.counts.get(i).copied().unwrap_or(0))
            .collect();
        Ok(Histogram {
            bin_width: self.bin_width,
            counts,
        })
    }
}

pub const DEFAULT_BIN_WIDTH_M: f64 = 1.0;

pub fn error_histogram(errors: &[f64], bin_width: f64) -> Result<Histogram> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::InvalidParameter(format!("bin width must be positive, got {bin_width}")));
    }
    let mut counts: Vec<u64> = Vec::new();
    for &e in errors {
        if !(e.is_finite() && e >= 0.0) {
            return Err(Error::InvalidParameter(format!("error values must be finite and nonnegative, got {e}")));
        }
        let bin = (e / bin_width).floor() as usize;
        if bin >= counts.len() {
            counts.resize(bin + 1, 0);
        }
        counts[bin] += 1;
    }
    Ok(Histogram { bin_width, counts })
}
