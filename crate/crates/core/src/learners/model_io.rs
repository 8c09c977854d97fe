//! Versioned binary model files.
//!
//! Layout (little-endian): magic `CSILOCMD`, format version (u32), kind tag
//! (u8: 1 = ELM, 2 = K-nN), beta layout version (u32), master seed (u64),
//! config hash (u64), then the kind-specific payload. ELM files store the
//! weight seed instead of `W`; the weights are regenerated on load.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Activation, ElmModel, KnnModel, Regressor};
use crate::codec::{Reader, Writer};
use crate::features::Standardizer;
use crate::{Error, Position2D, Result};

const MAGIC: &[u8; 8] = b"CSILOCMD";
pub const MODEL_FORMAT_VERSION: u32 = 1;
/// `β` stored n × 2, neuron-major; prediction is `βᵀ φ(W x)`.
pub const BETA_LAYOUT_VERSION: u32 = 1;

const KIND_ELM: u8 = 1;
const KIND_KNN: u8 = 2;
const DISTANCE_EUCLIDEAN: u8 = 1;

/// Where an artifact came from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub config_hash: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Elm(ElmModel),
    Knn(KnnModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Elm(_) => "elm",
            Model::Knn(_) => "knn",
        }
    }

    pub fn as_regressor(&self) -> &dyn Regressor {
        match self {
            Model::Elm(m) => m,
            Model::Knn(m) => m,
        }
    }
}

impl Regressor for Model {
    fn input_dim(&self) -> usize {
        self.as_regressor().input_dim()
    }

    fn predict(&self, x: &[f64]) -> Result<Position2D> {
        self.as_regressor().predict(x)
    }

    fn predict_batch(&self, features: &DMatrix<f64>) -> Result<Vec<Position2D>> {
        self.as_regressor().predict_batch(features)
    }
}

pub fn model_save(model: &Model, provenance: Provenance) -> Result<Vec<u8>> {
    let mut w = Writer::new();
    w.bytes(MAGIC).u32(MODEL_FORMAT_VERSION);
    match model {
        Model::Elm(m) => {
            let beta = m.beta().ok_or(Error::Untrained)?;
            w.u8(KIND_ELM)
                .u32(BETA_LAYOUT_VERSION)
                .u64(provenance.master_seed)
                .u64(provenance.config_hash)
                .u64(m.neurons() as u64)
                .u64(m.input_dim() as u64)
                .u64(m.seed())
                .f64(m.gamma())
                .u8(m.activation().tag());
            match m.standardizer() {
                Some(s) => {
                    w.u8(1).f64s(s.mean.iter().copied()).f64s(s.scale.iter().copied());
                }
                None => {
                    w.u8(0);
                }
            }
            for row in beta.row_iter() {
                w.f64(row[0]).f64(row[1]);
            }
        }
        Model::Knn(m) => {
            w.u8(KIND_KNN)
                .u32(BETA_LAYOUT_VERSION)
                .u64(provenance.master_seed)
                .u64(provenance.config_hash)
                .u64(m.k() as u64)
                .u64(m.len() as u64)
                .u64(m.input_dim() as u64)
                .u8(DISTANCE_EUCLIDEAN)
                .f64s(m.features().iter().copied());
            for p in m.positions() {
                w.f64(p.x).f64(p.y);
            }
        }
    }
    Ok(w.finish())
}

pub fn model_load(bytes: &[u8]) -> Result<(Model, Provenance)> {
    let mut r = Reader::new(bytes, "model file");
    r.expect_magic(MAGIC)?;
    r.expect_version("model format", MODEL_FORMAT_VERSION)?;
    let kind = r.u8()?;
    r.expect_version("beta layout", BETA_LAYOUT_VERSION)?;
    let provenance = Provenance {
        master_seed: r.u64()?,
        config_hash: r.u64()?,
    };
    let model = match kind {
        KIND_ELM => {
            let n = r.len(16)?;
            let m = r.len(0)?;
            let seed = r.u64()?;
            let gamma = r.f64()?;
            let tag = r.u8()?;
            let activation = Activation::from_tag(tag)
                .ok_or_else(|| Error::Format(format!("unknown activation tag {tag}")))?;
            let standardizer = match r.u8()? {
                0 => None,
                1 => {
                    let mean = r.f64s(m)?;
                    let scale = r.f64s(m)?;
                    Some(Standardizer { mean, scale })
                }
                f => return Err(Error::Format(format!("bad standardizer flag {f}"))),
            };
            let flat = r.f64s(n * 2)?;
            r.finish()?;
            if n == 0 || m == 0 {
                return Err(Error::Format("ELM dimensions must be positive".into()));
            }
            let beta = DMatrix::from_row_slice(n, 2, &flat);
            let weights = ElmModel::draw_weights(n, m, seed);
            Model::Elm(ElmModel::from_parts(weights, activation, gamma, seed, standardizer, Some(beta)))
        }
        KIND_KNN => {
            let k = r.len(0)?;
            let t = r.len(16)?;
            let m = r.len(0)?;
            let dist = r.u8()?;
            if dist != DISTANCE_EUCLIDEAN {
                return Err(Error::Format(format!("unknown distance tag {dist}")));
            }
            let feats = r.f64s(t.checked_mul(m).ok_or_else(|| Error::Format("size overflow".into()))?)?;
            let pos = r.f64s(2 * t)?;
            r.finish()?;
            let positions = pos.chunks_exact(2).map(|c| Position2D::new(c[0], c[1])).collect();
            Model::Knn(KnnModel::new(DMatrix::from_vec(m, t, feats), positions, k)?)
        }
        other => return Err(Error::Format(format!("unknown model kind {other}"))),
    };
    Ok((model, provenance))
}
