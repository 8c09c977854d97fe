//! Covariance-fingerprint localization for multi-antenna base stations.
//!
//! The pipeline runs in five stages:
//!
//! * [`scene`] synthesizes uplink channel snapshots from a geometric
//!   scattering model and a moving user trajectory;
//! * [`features`] turns short windows of snapshots into trace-normalized
//!   covariance feature vectors of length `N²`;
//! * [`learners`] maps feature vectors to 2-D positions with an extreme
//!   learning machine (random hidden layer, ridge-trained readout) or a
//!   K-nearest-neighbors barycenter;
//! * [`evaluation`] computes localization error statistics, Monte-Carlo
//!   MSE estimates over the random hidden layer, and parameter sweeps;
//! * [`dataset`], [`config`] and [`pipeline`] handle persistence,
//!   configuration, and end-to-end recipes used by the CLI.

pub mod codec;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod learners;
pub mod pipeline;
pub mod seed;
pub mod scene;

pub use error::{Error, Result};
pub use scene::Position2D;

/// Complex sample type used for channel vectors and covariances.
pub type C64 = nalgebra::Complex<f64>;
