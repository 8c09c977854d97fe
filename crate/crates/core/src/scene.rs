//! Synthetic uplink channels for a multi-antenna base station.
//!
//! A scene is a set of scattering clusters around a base station. Each
//! cluster contributes a fixed set of ray points (drawn once per scene), so
//! the spatial covariance at a given user position is deterministic and only
//! the per-ray complex gains, the receiver noise and the common phase change
//! from one snapshot to the next.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::seed::Rng;
use crate::{Error, Result, C64};

/// Carrier wavelength of a 3.5 GHz carrier, in meters.
pub const DEFAULT_WAVELENGTH_M: f64 = 299_792_458.0 / 3.5e9;

pub type Point3 = [f64; 3];

fn distance(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn finite3(p: &Point3) -> bool {
    p.iter().all(|v| v.is_finite())
}

/// Horizontal-plane position, meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Position2D {
    pub x: f64,
    pub y: f64,
}

impl Position2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Linear interpolation, `t = 0` gives `self`.
    pub fn lerp(&self, other: &Position2D, t: f64) -> Position2D {
        Position2D {
            x: self.x + (other.x - self.x) * t,
            y: self.y + (other.y - self.y) * t,
        }
    }

    pub fn at_height(&self, z: f64) -> Point3 {
        [self.x, self.y, z]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    A,
    B,
}

impl Polarization {
    pub fn other(self) -> Polarization {
        match self {
            Polarization::A => Polarization::B,
            Polarization::B => Polarization::A,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub position_m: Point3,
    pub polarization: Polarization,
}

/// Antenna array, element positions relative to the array reference point.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayGeometry {
    elements: Vec<Element>,
    wavelength_m: f64,
    cross_pol_gain: f64,
}

impl ArrayGeometry {
    pub const DEFAULT_CROSS_POL_GAIN: f64 = 0.3;

    pub fn new(elements: Vec<Element>, wavelength_m: f64, cross_pol_gain: f64) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidGeometry("array needs at least one element".into()));
        }
        if !(wavelength_m.is_finite() && wavelength_m > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "carrier wavelength must be positive, got {wavelength_m}"
            )));
        }
        if !(0.0..=1.0).contains(&cross_pol_gain) {
            return Err(Error::InvalidGeometry(format!(
                "cross-polarization gain must lie in [0, 1], got {cross_pol_gain}"
            )));
        }
        for (i, e) in elements.iter().enumerate() {
            if !finite3(&e.position_m) {
                return Err(Error::InvalidGeometry(format!("element {i} has a non-finite position")));
            }
            if elements[..i]
                .iter()
                .any(|o| o.position_m == e.position_m && o.polarization == e.polarization)
            {
                return Err(Error::InvalidGeometry(format!(
                    "element {i} duplicates the position and polarization of an earlier element"
                )));
            }
        }
        Ok(Self {
            elements,
            wavelength_m,
            cross_pol_gain,
        })
    }

    /// Single-polarized line along x, first element at the origin.
    pub fn uniform_linear(count: usize, spacing_m: f64, wavelength_m: f64) -> Result<Self> {
        let elements = (0..count)
            .map(|k| Element {
                position_m: [k as f64 * spacing_m, 0.0, 0.0],
                polarization: Polarization::A,
            })
            .collect();
        Self::new(elements, wavelength_m, Self::DEFAULT_CROSS_POL_GAIN)
    }

    /// Planar panel in the x-z plane (boresight along +y). Elements are
    /// ordered row by row, column by column, and for dual-polarized panels
    /// the A port precedes the B port at each site.
    pub fn planar(
        columns: usize,
        rows: usize,
        horizontal_spacing_m: f64,
        vertical_spacing_m: f64,
        dual_polarized: bool,
        wavelength_m: f64,
    ) -> Result<Self> {
        let pols: &[Polarization] = if dual_polarized {
            &[Polarization::A, Polarization::B]
        } else {
            &[Polarization::A]
        };
        let mut elements = Vec::with_capacity(columns * rows * pols.len());
        for r in 0..rows {
            for c in 0..columns {
                for &p in pols {
                    elements.push(Element {
                        position_m: [c as f64 * horizontal_spacing_m, 0.0, r as f64 * vertical_spacing_m],
                        polarization: p,
                    });
                }
            }
        }
        Self::new(elements, wavelength_m, Self::DEFAULT_CROSS_POL_GAIN)
    }

    /// 4×4 dual-polarized half-wavelength panel at 3.5 GHz (32 ports).
    pub fn default_panel() -> Self {
        let l = DEFAULT_WAVELENGTH_M;
        Self::planar(4, 4, l / 2.0, l / 2.0, true, l).expect("static geometry is valid")
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn wavelength_m(&self) -> f64 {
        self.wavelength_m
    }

    pub fn cross_pol_gain(&self) -> f64 {
        self.cross_pol_gain
    }

    /// Keeps only the listed elements, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        let mut elements = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidSelection(format!(
                    "index {i} out of range for {} elements",
                    self.len()
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidSelection(format!("duplicate index {i}")));
            }
            elements.push(self.elements[i].clone());
        }
        Self::new(elements, self.wavelength_m, self.cross_pol_gain)
    }

    /// Drops the listed elements (failed RF chains).
    pub fn without(&self, discarded: &[usize]) -> Result<Self> {
        if let Some(&bad) = discarded.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidSelection(format!(
                "mask index {bad} out of range for {} elements",
                self.len()
            )));
        }
        let keep: Vec<usize> = (0..self.len()).filter(|i| !discarded.contains(i)).collect();
        self.subset(&keep)
    }
}

/// Narrowband array response to a point source transmitting on polarization A.
pub fn steering_vector(geometry: &ArrayGeometry, source: Point3) -> Result<DVector<C64>> {
    steering_vector_polarized(geometry, source, Polarization::A)
}

/// Entry `k` is `exp(-j 2π d_k / λ)` where `d_k` is the element-to-source
/// distance, scaled by the cross-polarization gain when element `k` and the
/// source use different polarizations.
pub fn steering_vector_polarized(
    geometry: &ArrayGeometry,
    source: Point3,
    polarization: Polarization,
) -> Result<DVector<C64>> {
    let lambda = geometry.wavelength_m;
    let mut out = DVector::zeros(geometry.len());
    for (k, e) in geometry.elements.iter().enumerate() {
        let d = distance(&e.position_m, &source);
        if !(d > 1e-9) {
            return Err(Error::DegenerateGeometry(format!(
                "source coincides with element {k}"
            )));
        }
        // Whole wavelengths contribute no phase; keep only the fractional part.
        let phase = -2.0 * PI * (d / lambda).fract();
        let gain = if e.polarization == polarization {
            1.0
        } else {
            geometry.cross_pol_gain
        };
        out[k] = C64::from_polar(gain, phase);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub centroid_m: Point3,
    pub spread_m: f64,
    pub ray_count: usize,
    pub mean_power: f64,
}

fn default_ue_height() -> f64 {
    1.5
}

/// Geometric scattering environment around one base station.
///
/// When `reference_distance_m` is set, the LOS power and each cluster's
/// power are weighted by `1 / (1 + (d / d_ref)²)` where `d` is the distance
/// from the user to the base station or to the cluster centroid. Without it
/// the cluster powers do not depend on the user position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringScene {
    pub bs_position_m: Point3,
    #[serde(default)]
    pub clusters: Vec<Cluster>,
    pub los_enabled: bool,
    #[serde(default)]
    pub los_power: f64,
    #[serde(default)]
    pub noise_power: f64,
    #[serde(default = "default_ue_height")]
    pub ue_height_m: f64,
    #[serde(default)]
    pub reference_distance_m: Option<f64>,
}

/// Extent of the synthetic measurement area, meters.
pub const DEFAULT_AREA_M: (f64, f64) = (200.0, 300.0);

impl ScatteringScene {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScene(msg));
        if !finite3(&self.bs_position_m) {
            return bad("base station position must be finite".into());
        }
        for (name, p) in [("los_power", self.los_power), ("noise_power", self.noise_power)] {
            if !(p.is_finite() && p >= 0.0) {
                return bad(format!("{name} must be a nonnegative finite number, got {p}"));
            }
        }
        if !self.ue_height_m.is_finite() {
            return bad("ue_height_m must be finite".into());
        }
        if let Some(d) = self.reference_distance_m {
            if !(d.is_finite() && d > 0.0) {
                return bad(format!("reference_distance_m must be positive, got {d}"));
            }
        }
        for (i, c) in self.clusters.iter().enumerate() {
            if !finite3(&c.centroid_m) {
                return bad(format!("cluster {i}: centroid must be finite"));
            }
            if !(c.spread_m.is_finite() && c.spread_m >= 0.0) {
                return bad(format!("cluster {i}: spread must be nonnegative"));
            }
            if c.ray_count == 0 {
                return bad(format!("cluster {i}: ray_count must be at least 1"));
            }
            if !(c.mean_power.is_finite() && c.mean_power >= 0.0) {
                return bad(format!("cluster {i}: mean_power must be nonnegative"));
            }
        }
        Ok(())
    }

    /// Default synthetic scene over a 200 m × 300 m area: base station on a
    /// rooftop south of the area, a dominant LOS path, and six scattering
    /// clusters placed by `rng`.
    pub fn synthetic_default(rng: &mut Rng) -> Self {
        let (w, h) = DEFAULT_AREA_M;
        let clusters = (0..6)
            .map(|_| Cluster {
                centroid_m: [
                    rng.random_range(-0.1 * w..1.1 * w),
                    rng.random_range(-0.1 * h..1.1 * h),
                    rng.random_range(3.0..30.0),
                ],
                spread_m: rng.random_range(2.0..6.0),
                ray_count: 20,
                mean_power: rng.random_range(0.5..2.0),
            })
            .collect();
        Self {
            bs_position_m: [0.5 * w, -30.0, 25.0],
            clusters,
            los_enabled: true,
            los_power: 64.0,
            noise_power: 1e-3,
            ue_height_m: default_ue_height(),
            reference_distance_m: Some(60.0),
        }
    }

    fn falloff(&self, d: f64) -> f64 {
        match self.reference_distance_m {
            Some(r) => 1.0 / (1.0 + (d / r) * (d / r)),
            None => 1.0,
        }
    }
}

#[derive(Clone, Debug)]
struct Ray {
    cluster: usize,
    response: DVector<C64>,
}

/// A scene bound to an array with its ray geometry drawn.
#[derive(Clone, Debug)]
pub struct ChannelModel {
    scene: ScatteringScene,
    geometry: ArrayGeometry,
    rays: Vec<Ray>,
}

impl ChannelModel {
    /// Draws the fixed ray points of every cluster from `scene_rng`. Each
    /// ray point is the centroid plus isotropic Gaussian jitter with the
    /// cluster spread as standard deviation, and carries a random
    /// polarization tag.
    pub fn new(scene: ScatteringScene, geometry: ArrayGeometry, scene_rng: &mut Rng) -> Result<Self> {
        scene.validate()?;
        let mut rays = Vec::new();
        for (ci, c) in scene.clusters.iter().enumerate() {
            for _ in 0..c.ray_count {
                let mut p = c.centroid_m;
                for v in p.iter_mut() {
                    let z: f64 = StandardNormal.sample(scene_rng);
                    *v += c.spread_m * z;
                }
                let pol = if scene_rng.random::<bool>() {
                    Polarization::A
                } else {
                    Polarization::B
                };
                let rel = relative(&p, &scene.bs_position_m);
                rays.push(Ray {
                    cluster: ci,
                    response: steering_vector_polarized(&geometry, rel, pol)?,
                });
            }
        }
        Ok(Self {
            scene,
            geometry,
            rays,
        })
    }

    pub fn scene(&self) -> &ScatteringScene {
        &self.scene
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn antenna_count(&self) -> usize {
        self.geometry.len()
    }

    /// One snapshot at `ue`: LOS term plus per-ray random gains plus noise.
    pub fn synth_channel(&self, ue: Position2D, timestamp_s: f64, rng: &mut Rng) -> Result<ChannelSnapshot> {
        let scene = &self.scene;
        let n = self.geometry.len();
        let ue3 = ue.at_height(scene.ue_height_m);
        let mut h = DVector::<C64>::zeros(n);

        if scene.los_enabled && scene.los_power > 0.0 {
            let d = distance(&ue3, &scene.bs_position_m);
            let amp = (scene.los_power * scene.falloff(d)).sqrt();
            let a = steering_vector(&self.geometry, relative(&ue3, &scene.bs_position_m))?;
            h.axpy(C64::new(amp, 0.0), &a, C64::new(1.0, 0.0));
        }

        let ray_var: Vec<f64> = scene
            .clusters
            .iter()
            .map(|c| c.mean_power / c.ray_count as f64 * scene.falloff(distance(&ue3, &c.centroid_m)))
            .collect();
        for ray in &self.rays {
            let g = complex_normal(rng, ray_var[ray.cluster]);
            h.axpy(g, &ray.response, C64::new(1.0, 0.0));
        }

        if scene.noise_power > 0.0 {
            for v in h.iter_mut() {
                *v += complex_normal(rng, scene.noise_power);
            }
        }

        Ok(ChannelSnapshot {
            h,
            timestamp_s,
            ue_position: ue,
        })
    }
}

fn relative(p: &Point3, origin: &Point3) -> Point3 {
    [p[0] - origin[0], p[1] - origin[1], p[2] - origin[2]]
}

/// Circularly-symmetric complex Gaussian with the given total variance.
fn complex_normal(rng: &mut Rng, variance: f64) -> C64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSnapshot {
    pub h: DVector<C64>,
    pub timestamp_s: f64,
    pub ue_position: Position2D,
}

/// Rotates every entry by `exp(j·phase)`.
pub fn apply_common_phase(snapshot: &ChannelSnapshot, phase: f64) -> ChannelSnapshot {
    let rot = C64::from_polar(1.0, phase);
    ChannelSnapshot {
        h: snapshot.h.map(|v| v * rot),
        timestamp_s: snapshot.timestamp_s,
        ue_position: snapshot.ue_position,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedPosition {
    pub time_s: f64,
    pub position: Position2D,
}

/// Constant-speed walk along a polyline of waypoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<Position2D>,
    pub speed_mps: f64,
    #[serde(default = "Trajectory::default_snapshot_rate")]
    pub snapshot_rate_hz: f64,
    #[serde(default = "Trajectory::default_position_rate")]
    pub position_rate_hz: f64,
}

const GRID_EPS: f64 = 1e-9;

impl Trajectory {
    pub const DEFAULT_SNAPSHOT_RATE_HZ: f64 = 10.0;
    pub const DEFAULT_POSITION_RATE_HZ: f64 = 1.0;

    fn default_snapshot_rate() -> f64 {
        Self::DEFAULT_SNAPSHOT_RATE_HZ
    }

    fn default_position_rate() -> f64 {
        Self::DEFAULT_POSITION_RATE_HZ
    }

    pub fn new(waypoints: Vec<Position2D>, speed_mps: f64) -> Result<Self> {
        let t = Self {
            waypoints,
            speed_mps,
            snapshot_rate_hz: Self::DEFAULT_SNAPSHOT_RATE_HZ,
            position_rate_hz: Self::DEFAULT_POSITION_RATE_HZ,
        };
        t.validate()?;
        Ok(t)
    }

    /// Boustrophedon sweep of a rectangle with lanes parallel to y.
    pub fn serpentine(origin: Position2D, width_m: f64, height_m: f64, lane_spacing_m: f64, speed_mps: f64) -> Result<Self> {
        if !(lane_spacing_m > 0.0 && width_m >= 0.0 && height_m > 0.0) {
            return Err(Error::InvalidTrajectory(
                "serpentine needs positive height and lane spacing".into(),
            ));
        }
        let lanes = (width_m / lane_spacing_m + GRID_EPS).floor() as usize + 1;
        let mut waypoints = Vec::with_capacity(2 * lanes);
        for k in 0..lanes {
            let x = origin.x + k as f64 * lane_spacing_m;
            let (y0, y1) = if k % 2 == 0 {
                (origin.y, origin.y + height_m)
            } else {
                (origin.y + height_m, origin.y)
            };
            waypoints.push(Position2D::new(x, y0));
            waypoints.push(Position2D::new(x, y1));
        }
        Self::new(waypoints, speed_mps)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidTrajectory(m.into()));
        if self.waypoints.len() < 2 {
            return bad("at least two waypoints are required");
        }
        if self.waypoints.iter().any(|p| !p.is_finite()) {
            return bad("waypoints must be finite");
        }
        if !(self.speed_mps.is_finite() && self.speed_mps > 0.0) {
            return bad("speed must be positive");
        }
        if !(self.snapshot_rate_hz.is_finite() && self.snapshot_rate_hz > 0.0)
            || !(self.position_rate_hz.is_finite() && self.position_rate_hz > 0.0)
        {
            return bad("sampling rates must be positive");
        }
        if !(self.length_m() > 0.0) {
            return bad("zero-length path");
        }
        Ok(())
    }

    pub fn length_m(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }

    pub fn duration_s(&self) -> f64 {
        self.length_m() / self.speed_mps
    }

    /// True position at time `t`, clamped to the path ends.
    pub fn position_at(&self, t: f64) -> Position2D {
        let mut remaining = (t * self.speed_mps).max(0.0);
        for w in self.waypoints.windows(2) {
            let seg = w[0].distance(&w[1]);
            if remaining <= seg && seg > 0.0 {
                return w[0].lerp(&w[1], remaining / seg);
            }
            remaining -= seg;
        }
        *self.waypoints.last().expect("validated trajectory")
    }

    /// Times on a `1/rate` grid from 0 to `duration`, endpoint included only
    /// when it lands on the grid.
    fn grid(&self, rate: f64) -> Vec<f64> {
        let count = (self.duration_s() * rate + GRID_EPS).floor() as usize + 1;
        (0..count).map(|i| i as f64 / rate).collect()
    }

    /// Position fixes at `position_rate_hz`, plus a closing fix at the end of
    /// the path when it falls between grid points.
    pub fn position_fixes(&self) -> Vec<TimedPosition> {
        let mut times = self.grid(self.position_rate_hz);
        let end = self.duration_s();
        if end - times.last().copied().unwrap_or(0.0) > GRID_EPS {
            times.push(end);
        }
        times
            .into_iter()
            .map(|t| TimedPosition {
                time_s: t,
                position: self.position_at(t),
            })
            .collect()
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        self.grid(self.snapshot_rate_hz)
    }
}

/// Linear interpolation within time-sorted fixes (clamped at both ends).
pub fn interpolate_fixes(fixes: &[TimedPosition], t: f64) -> Position2D {
    match fixes {
        [] => Position2D::default(),
        [only] => only.position,
        _ => {
            let i = fixes.partition_point(|f| f.time_s <= t);
            if i == 0 {
                return fixes[0].position;
            }
            if i >= fixes.len() {
                return fixes[fixes.len() - 1].position;
            }
            let (a, b) = (&fixes[i - 1], &fixes[i]);
            let span = b.time_s - a.time_s;
            if span <= 0.0 {
                a.position
            } else {
                a.position.lerp(&b.position, (t - a.time_s) / span)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrajectorySamples {
    pub snapshots: Vec<ChannelSnapshot>,
    pub fixes: Vec<TimedPosition>,
}

/// Walks the trajectory, synthesizing a snapshot at every snapshot tick.
///
/// The channel is drawn at the true position, rotated by a random common
/// phase (residual carrier offset), and labeled with the position
/// interpolated from the surrounding position fixes.
pub fn sample_trajectory(traj: &Trajectory, model: &ChannelModel, rng: &mut Rng) -> Result<TrajectorySamples> {
    sample_trajectory_prefix(traj, model, rng, usize::MAX)
}

/// Like [`sample_trajectory`] but stops after `max_snapshots`; the result is
/// a prefix of the full run with the same generator state.
pub fn sample_trajectory_prefix(traj: &Trajectory, model: &ChannelModel, rng: &mut Rng, max_snapshots: usize) -> Result<TrajectorySamples> {
    traj.validate()?;
    let fixes = traj.position_fixes();
    let mut snapshots = Vec::new();
    for t in traj.snapshot_times().into_iter().take(max_snapshots) {
        let mut snap = model.synth_channel(traj.position_at(t), t, rng)?;
        let phase = rng.random_range(0.0..2.0 * PI);
        snap = apply_common_phase(&snap, phase);
        snap.ue_position = interpolate_fixes(&fixes, t);
        snapshots.push(snap);
    }
    Ok(TrajectorySamples { snapshots, fixes })
}
