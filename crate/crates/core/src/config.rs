//! Experiment configuration files.
//!
//! Configs are TOML with unit-suffixed keys. Only `master_seed` is
//! required; everything else falls back to the defaults below. Scene and
//! geometry files are resolved relative to the config file.
//!
//! ```toml
//! master_seed = 7
//! window_seconds = 1.0
//!
//! [trajectory]
//! lane_spacing_m = 25.0
//! speed_mps = 1.2
//!
//! [learner]
//! kind = "elm"
//! neurons = 8000
//! gamma_grid = "1e-6:1e2:log"
//!
//! [sweep]
//! axis = "gamma"
//! grid = "1e-6:1e2:log"
//! realizations = 100
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::evaluation::{LearnerSpec, SweepAxis};
use crate::learners::{Activation, ElmConfig, Provenance};
use crate::scene::{ArrayGeometry, Element, ScatteringScene, Trajectory, DEFAULT_AREA_M, DEFAULT_WAVELENGTH_M};
use crate::{seed, Error, Position2D, Result};

fn default_window() -> f64 {
    1.0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    #[serde(default)]
    pub scene_file: Option<PathBuf>,
    #[serde(default)]
    pub geometry_file: Option<PathBuf>,
    #[serde(default = "default_window")]
    pub window_seconds: f64,
    #[serde(default)]
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub learner: LearnerSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

/// Either explicit waypoints or a serpentine over a rectangle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySpec {
    pub waypoints_m: Option<Vec<[f64; 2]>>,
    pub origin_m: [f64; 2],
    pub width_m: f64,
    pub height_m: f64,
    pub lane_spacing_m: f64,
    pub speed_mps: f64,
    pub snapshot_rate_hz: f64,
    pub position_rate_hz: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            waypoints_m: None,
            origin_m: [0.0, 0.0],
            width_m: DEFAULT_AREA_M.0,
            height_m: DEFAULT_AREA_M.1,
            lane_spacing_m: 25.0,
            speed_mps: 1.2,
            snapshot_rate_hz: 10.0,
            position_rate_hz: 1.0,
        }
    }
}

impl TrajectorySpec {
    pub fn build(&self) -> Result<Trajectory> {
        let mut t = match &self.waypoints_m {
            Some(w) => Trajectory::new(w.iter().map(|p| Position2D::new(p[0], p[1])).collect(), self.speed_mps)?,
            None => Trajectory::serpentine(
                Position2D::new(self.origin_m[0], self.origin_m[1]),
                self.width_m,
                self.height_m,
                self.lane_spacing_m,
                self.speed_mps,
            )?,
        };
        t.snapshot_rate_hz = self.snapshot_rate_hz;
        t.position_rate_hz = self.position_rate_hz;
        t.validate()?;
        Ok(t)
    }
}

/// Contiguous-segment train/test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub test_fraction: f64,
    /// Windows per segment; whole segments go to one split.
    pub segment_windows: usize,
    /// Keep only the first windows of the trajectory.
    pub max_windows: Option<usize>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 550.0 / 4050.0,
            segment_windows: 10,
            max_windows: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Elm,
    Knn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerSection {
    pub kind: LearnerKind,
    pub neurons: usize,
    pub gamma: f64,
    pub activation: Activation,
    pub k: usize,
    /// Seed of the hidden weights; derived from the master seed when absent.
    pub seed: Option<u64>,
    pub standardize_inputs: bool,
    /// γ grid searched on the test split; `gamma` is used when absent.
    pub gamma_grid: Option<String>,
}

impl Default for LearnerSection {
    fn default() -> Self {
        let elm = ElmConfig::default();
        Self {
            kind: LearnerKind::Elm,
            neurons: elm.neurons,
            gamma: elm.gamma,
            activation: elm.activation,
            k: 3,
            seed: None,
            standardize_inputs: elm.standardize_inputs,
            gamma_grid: None,
        }
    }
}

impl LearnerSection {
    pub fn elm_config(&self, master_seed: u64) -> ElmConfig {
        ElmConfig {
            neurons: self.neurons,
            activation: self.activation,
            gamma: self.gamma,
            seed: self.seed.unwrap_or_else(|| seed::derive(master_seed, "elm-weights", 0)),
            standardize_inputs: self.standardize_inputs,
        }
    }

    pub fn gamma_values(&self) -> Result<Vec<f64>> {
        self.gamma_grid.as_deref().map_or(Ok(Vec::new()), parse_grid)
    }

    pub fn spec(&self, master_seed: u64) -> Result<LearnerSpec> {
        Ok(match self.kind {
            LearnerKind::Elm => LearnerSpec::Elm {
                config: self.elm_config(master_seed),
                gamma_grid: self.gamma_values()?,
            },
            LearnerKind::Knn => LearnerSpec::Knn { k: self.k },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub grid: Option<String>,
    pub realizations: usize,
    /// Per-setting γ grid for the neuron and activation sweeps.
    pub gamma_grid: Option<String>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis: SweepAxis::Gamma,
            grid: None,
            realizations: 100,
            gamma_grid: None,
        }
    }
}

/// Array description: a planar panel or an explicit element list, minus
/// the masked element indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    #[serde(default = "default_wavelength")]
    pub wavelength_m: f64,
    #[serde(default = "default_cross_pol_gain")]
    pub cross_pol_gain: f64,
    #[serde(default)]
    pub planar: Option<PlanarSpec>,
    #[serde(default)]
    pub elements: Option<Vec<Element>>,
    #[serde(default)]
    pub antenna_mask: Vec<usize>,
}

fn default_wavelength() -> f64 {
    DEFAULT_WAVELENGTH_M
}

fn default_cross_pol_gain() -> f64 {
    ArrayGeometry::DEFAULT_CROSS_POL_GAIN
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanarSpec {
    pub columns: usize,
    pub rows: usize,
    pub horizontal_spacing_m: f64,
    pub vertical_spacing_m: f64,
    #[serde(default)]
    pub dual_polarized: bool,
}

impl GeometrySpec {
    pub fn build(&self) -> Result<ArrayGeometry> {
        let elements = match (&self.planar, &self.elements) {
            (Some(p), None) => ArrayGeometry::planar(
                p.columns,
                p.rows,
                p.horizontal_spacing_m,
                p.vertical_spacing_m,
                p.dual_polarized,
                self.wavelength_m,
            )?
            .elements()
            .to_vec(),
            (None, Some(e)) => e.clone(),
            _ => return Err(Error::Config("geometry needs exactly one of [planar] or [[elements]]".into())),
        };
        ArrayGeometry::new(elements, self.wavelength_m, self.cross_pol_gain)?.without(&self.antenna_mask)
    }
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl ExperimentConfig {
    /// Config with every default and the given seed.
    pub fn with_seed(master_seed: u64) -> Self {
        toml::from_str(&format!("master_seed = {master_seed}")).expect("minimal config parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads a config file, resolving referenced files against its directory
    /// and checking that they exist.
    pub fn load(path: &Path) -> Result<Self> {
        let mut c: Self = read_toml(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for f in [&mut c.scene_file, &mut c.geometry_file].into_iter().flatten() {
            if f.is_relative() {
                *f = base.join(&*f);
            }
            if !f.is_file() {
                return Err(Error::Config(format!("referenced file {} does not exist", f.display())));
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.window_seconds.is_finite() && self.window_seconds > 0.0) {
            return bad(format!("window_seconds must be positive, got {}", self.window_seconds));
        }
        let f = self.split.test_fraction;
        if !(0.0..1.0).contains(&f) {
            return bad(format!("split.test_fraction must be in [0, 1), got {f}"));
        }
        if self.split.segment_windows == 0 {
            return bad("split.segment_windows must be at least 1".into());
        }
        let l = &self.learner;
        if l.neurons == 0 || l.k == 0 {
            return bad("learner.neurons and learner.k must be at least 1".into());
        }
        if !(l.gamma.is_finite() && l.gamma >= 0.0) {
            return bad(format!("learner.gamma must be nonnegative, got {}", l.gamma));
        }
        l.gamma_values()?;
        if let Some(g) = &self.sweep.grid {
            parse_grid(g)?;
        }
        if let Some(g) = &self.sweep.gamma_grid {
            parse_grid(g)?;
        }
        Ok(())
    }

    pub fn scene(&self) -> Result<ScatteringScene> {
        let scene = match &self.scene_file {
            Some(p) => read_toml(p)?,
            None => ScatteringScene::synthetic_default(&mut seed::labeled_stream(self.master_seed, "scene", 0)),
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        match &self.geometry_file {
            Some(p) => read_toml::<GeometrySpec>(p)?.build(),
            None => Ok(ArrayGeometry::default_panel()),
        }
    }

    /// Hash of everything that shapes the results other than the master
    /// seed and output location, including referenced file contents.
    pub fn config_hash(&self) -> Result<u64> {
        let mut c = self.clone();
        c.master_seed = 0;
        c.output_dir = PathBuf::new();
        let scene = c.scene_file.take().map(|p| read_toml::<ScatteringScene>(&p)).transpose()?;
        let geometry = c.geometry_file.take().map(|p| read_toml::<GeometrySpec>(&p)).transpose()?;
        let canonical = serde_json::to_string(&(c, scene, geometry)).map_err(|e| Error::Config(e.to_string()))?;
        Ok(seed::hash64(canonical.as_bytes()))
    }

    pub fn provenance(&self) -> Result<Provenance> {
        Ok(Provenance {
            master_seed: self.master_seed,
            config_hash: self.config_hash()?,
        })
    }
}

/// Parses a grid: `a:b:log` (one point per decade), `a:b:count:log`,
/// `a:b:count:lin`, or a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("malformed grid '{text}'"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.as_slice() {
        [single] => single.split(',').map(num).collect::<Result<Vec<_>>>()?,
        [a, b, kind] | [a, b, _, kind] => {
            let (a, b) = (num(a)?, num(b)?);
            let count = match parts.len() {
                4 => Some(parts[2].trim().parse::<usize>().map_err(|_| bad())?),
                _ => None,
            };
            match kind.trim() {
                "log" => {
                    if !(a > 0.0 && b > 0.0) {
                        return Err(Error::Config(format!("log grid '{text}' needs positive bounds")));
                    }
                    let (la, lb) = (a.log10(), b.log10());
                    let count = count.unwrap_or(((lb - la).abs().round() as usize) + 1);
                    spaced(la, lb, count).into_iter().map(|e| 10f64.powf(e)).collect()
                }
                "lin" => spaced(a, b, count.ok_or_else(bad)?),
                _ => return Err(bad()),
            }
        }
        _ => return Err(bad()),
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(values)
}

fn spaced(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..count).map(|i| a + (b - a) * i as f64 / (count - 1) as f64).collect(),
    }
}
