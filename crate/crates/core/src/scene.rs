//! Grids, object configurations, sampling schemes and the noise model.

use crate::error::{invalid, Error, Result};
use crate::forward::DataMatrix;
use crate::linalg::{max_abs, spectral_norm, CMat, CVec, C64};
use crate::rng::{derive_label, rng};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

/// Ordered set of candidate object positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Minimal spacing ℓ between points.
    pub spacing: f64,
    pub points: Vec<[f64; 3]>,
    /// Ambient dimension of the object (1, 2 or 3).
    pub dim: usize,
    /// Side length √N for planar lattices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<usize>,
    /// Translation applied to the first-quadrant lattice.
    #[serde(default)]
    pub offset: [f64; 3],
}

impl Grid {
    /// Planar lattice `(p₁ℓ, p₂ℓ, 0)`, `p₁, p₂ = 1..=side`, enumerated with
    /// `j = (p₁−1)·side + p₂` (one-based).
    pub fn planar(side: usize, spacing: f64) -> Result<Grid> {
        if side == 0 {
            return Err(invalid("grid side must be at least 1"));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(invalid(format!("grid spacing must be positive, got {spacing}")));
        }
        let mut points = Vec::with_capacity(side * side);
        for p1 in 1..=side {
            for p2 in 1..=side {
                points.push([p1 as f64 * spacing, p2 as f64 * spacing, 0.0]);
            }
        }
        Ok(Grid { spacing, points, dim: 2, side: Some(side), offset: [0.0; 3] })
    }

    /// Arbitrary point set with a declared spacing.
    pub fn from_points(points: Vec<[f64; 3]>, spacing: f64, dim: usize) -> Result<Grid> {
        if !(spacing > 0.0) {
            return Err(invalid("grid spacing must be positive"));
        }
        if !(1..=3).contains(&dim) {
            return Err(invalid("grid dimension must be 1, 2 or 3"));
        }
        Ok(Grid { spacing, points, dim, side: None, offset: [0.0; 3] })
    }

    /// Translates every point, keeping the index map.
    pub fn shifted(mut self, by: [f64; 3]) -> Grid {
        for p in &mut self.points {
            for (c, d) in p.iter_mut().zip(by.iter()) {
                *c += d;
            }
        }
        for (o, d) in self.offset.iter_mut().zip(by.iter()) {
            *o += d;
        }
        self
    }

    /// Translates the grid so that its bounding box is centred on the origin.
    pub fn centered(self) -> Grid {
        let (lo, hi) = self.extent();
        let by = [-(lo[0] + hi[0]) / 2.0, -(lo[1] + hi[1]) / 2.0, -(lo[2] + hi[2]) / 2.0];
        self.shifted(by)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Zero-based index of lattice coordinates `(p₁, p₂)` (one-based).
    pub fn index_of(&self, p1: usize, p2: usize) -> Option<usize> {
        let side = self.side?;
        if (1..=side).contains(&p1) && (1..=side).contains(&p2) {
            Some((p1 - 1) * side + (p2 - 1))
        } else {
            None
        }
    }

    /// Lattice coordinates `(p₁, p₂)` (one-based) of a zero-based index.
    pub fn lattice_coords(&self, j: usize) -> Option<(usize, usize)> {
        let side = self.side?;
        (j < side * side).then(|| (j / side + 1, j % side + 1))
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn extent(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.points {
            for d in 0..3 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    /// Indices of all grid points within `radius` of `x`.
    pub fn within(&self, x: [f64; 3], radius: f64) -> Vec<usize> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| distance(p, &x) <= radius)
            .map(|(j, _)| j)
            .collect()
    }

    /// Index of the grid point nearest to `x` (lowest index on ties).
    pub fn nearest(&self, x: [f64; 3]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (j, p) in self.points.iter().enumerate() {
            let d = distance(p, &x);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        best.map(|(j, _)| j)
    }
}

pub(crate) fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Point objects on a grid: support `S` and amplitudes `ξ_j`, stored in
/// ascending index order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub support: Vec<usize>,
    pub amplitudes: Vec<C64>,
}

impl Scene {
    pub fn new(support: Vec<usize>, amplitudes: Vec<C64>) -> Result<Scene> {
        if support.len() != amplitudes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} support indices but {} amplitudes",
                support.len(),
                amplitudes.len()
            )));
        }
        if amplitudes.iter().any(|a| a.norm() == 0.0) {
            return Err(invalid("scene amplitudes must be nonzero on the support"));
        }
        let mut pairs: Vec<(usize, C64)> = support.into_iter().zip(amplitudes).collect();
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(invalid("scene support indices must be distinct"));
        }
        let (support, amplitudes) = pairs.into_iter().unzip();
        Ok(Scene { support, amplitudes })
    }

    pub fn empty() -> Scene {
        Scene { support: Vec::new(), amplitudes: Vec::new() }
    }

    pub fn s(&self) -> usize {
        self.support.len()
    }

    /// `min |ξ_j|`, absent for an empty scene.
    pub fn xi_min(&self) -> Option<f64> {
        self.amplitudes.iter().map(|a| a.norm()).reduce(f64::min)
    }

    /// `max |ξ_j|`, absent for an empty scene.
    pub fn xi_max(&self) -> Option<f64> {
        self.amplitudes.iter().map(|a| a.norm()).reduce(f64::max)
    }

    /// `ξ_max / ξ_min`.
    pub fn dynamic_range(&self) -> Option<f64> {
        Some(self.xi_max()? / self.xi_min()?)
    }

    /// Dense object vector of length `n_points`.
    pub fn dense(&self, n_points: usize) -> CVec {
        let mut z = CVec::zeros(n_points);
        for (&j, &a) in self.support.iter().zip(&self.amplitudes) {
            z[j] = a;
        }
        z
    }

    /// Amplitudes multiplied by `t`.
    pub fn scaled(&self, t: C64) -> Scene {
        Scene { support: self.support.clone(), amplitudes: self.amplitudes.iter().map(|a| a * t).collect() }
    }

    pub fn contains(&self, j: usize) -> bool {
        self.support.binary_search(&j).is_ok()
    }

    /// Complement of the support in `0..n_points`.
    pub fn complement(&self, n_points: usize) -> Vec<usize> {
        (0..n_points).filter(|j| !self.contains(*j)).collect()
    }
}

/// Draws `s` distinct grid indices uniformly and amplitudes with modulus uniform
/// in `[lo, hi]`. Amplitudes are positive reals.
pub fn draw_scene(grid: &Grid, s: usize, amp_range: (f64, f64), seed: u64) -> Result<Scene> {
    draw_scene_with_phase(grid, s, amp_range, false, seed)
}

/// As [`draw_scene`], optionally attaching a uniformly random phase to each amplitude.
pub fn draw_scene_with_phase(
    grid: &Grid,
    s: usize,
    (lo, hi): (f64, f64),
    random_phase: bool,
    seed: u64,
) -> Result<Scene> {
    if s > grid.len() {
        return Err(invalid(format!("sparsity {s} exceeds grid size {}", grid.len())));
    }
    if !(lo > 0.0 && lo <= hi) {
        return Err(invalid(format!("amplitude range must satisfy 0 < lo <= hi, got [{lo}, {hi}]")));
    }
    let mut r = rng(seed);
    let support = rand::seq::index::sample(&mut r, grid.len(), s).into_vec();
    let amplitudes = (0..s)
        .map(|_| {
            let m = if lo == hi { lo } else { r.random_range(lo..=hi) };
            if random_phase {
                C64::from_polar(m, r.random_range(0.0..2.0 * PI))
            } else {
                C64::new(m, 0.0)
            }
        })
        .collect();
    Scene::new(support, amplitudes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    FarFieldDirections,
    PlanarFourierDirections,
    ParaxialSensors,
    TimeSamples,
}

/// Measurement geometry: sampling directions, sensor positions or sample times,
/// plus optional incident directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingScheme {
    pub kind: SchemeKind,
    /// Unit directions, sensor positions, or times stored as `[t, 0, 0]`.
    pub sampling_points: Vec<[f64; 3]>,
    /// Square points `a_k ∈ [−1,1]²` behind planar Fourier directions.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub square_points: Vec<[f64; 2]>,
    /// Incident directions; when absent the sampling points double as sources.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incident_points: Option<Vec<[f64; 3]>>,
    /// Wavenumber ω (rad per unit length); unused for time samples.
    pub wavenumber: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aperture: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<f64>,
    pub seed: u64,
}

impl SamplingScheme {
    pub fn n(&self) -> usize {
        self.sampling_points.len()
    }

    pub fn m(&self) -> usize {
        self.incident_points.as_ref().map_or(self.n(), Vec::len)
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.wavenumber
    }

    /// Incident directions (or source positions) in effect.
    pub fn incident(&self) -> &[[f64; 3]] {
        self.incident_points.as_deref().unwrap_or(&self.sampling_points)
    }

    /// Integer sample times for time-sample schemes.
    pub fn times(&self) -> Vec<usize> {
        self.sampling_points.iter().map(|p| p[0].round() as usize).collect()
    }

    /// Scheme from explicit directions (normalized on entry).
    pub fn from_directions(kind: SchemeKind, directions: Vec<[f64; 3]>, wavenumber: f64) -> Result<Self> {
        let sampling_points = directions.into_iter().map(unit).collect::<Result<Vec<_>>>()?;
        if sampling_points.is_empty() {
            return Err(invalid("at least one direction is required"));
        }
        Ok(SamplingScheme {
            kind,
            sampling_points,
            square_points: Vec::new(),
            incident_points: None,
            wavenumber,
            aperture: None,
            z0: None,
            seed: 0,
        })
    }

    /// Scheme from explicit sensor positions on the plane `z = z₀`.
    pub fn from_sensors(sensors: Vec<[f64; 2]>, z0: f64, wavenumber: f64) -> Result<Self> {
        if sensors.is_empty() {
            return Err(invalid("at least one sensor is required"));
        }
        Ok(SamplingScheme {
            kind: SchemeKind::ParaxialSensors,
            sampling_points: sensors.iter().map(|p| [p[0], p[1], z0]).collect(),
            square_points: Vec::new(),
            incident_points: None,
            wavenumber,
            aperture: None,
            z0: Some(z0),
            seed: 0,
        })
    }
}

fn unit(v: [f64; 3]) -> Result<[f64; 3]> {
    let n = dot(&v, &v).sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(invalid("direction must be a finite nonzero vector"));
    }
    Ok([v[0] / n, v[1] / n, v[2] / n])
}

/// Direction `ŝ = (a/√2, √(2−|a|²)/√2)` for a square point `a ∈ [−1,1]²`.
pub fn planar_direction(a: [f64; 2]) -> [f64; 3] {
    let r2 = a[0] * a[0] + a[1] * a[1];
    [a[0] / SQRT_2, a[1] / SQRT_2, (2.0 - r2).max(0.0).sqrt() / SQRT_2]
}

/// Density of far-field directions on the sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SphereDensity {
    /// Law of `ŝ` when the square point is uniform on `[−1,1]²`.
    PlanarInduced,
    /// Uniform on the unit sphere.
    Uniform,
    /// Uniform on the unit circle of the xy-plane (two-dimensional problems).
    Circle,
    /// Axially symmetric law given by an inverse-CDF table of the polar cosine:
    /// `cos_polar[i]` is the quantile at probability `cdf[i]` (both increasing).
    Tabulated { cdf: Vec<f64>, cos_polar: Vec<f64> },
}

/// How incident directions relate to the sampling directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Incidence {
    /// Sources coincide with the sampling points.
    #[default]
    Coincident,
    /// `m` incident directions drawn independently from the same law.
    Independent(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionKind {
    PlanarFourier { wavenumber: f64, incidence: Incidence },
    FarField { wavenumber: f64, density: SphereDensity, incidence: Incidence },
}

fn draw_square<R: rand::Rng>(r: &mut R) -> [f64; 2] {
    [r.random_range(-1.0..=1.0), r.random_range(-1.0..=1.0)]
}

fn draw_sphere<R: rand::Rng>(r: &mut R, density: &SphereDensity) -> [f64; 3] {
    match density {
        SphereDensity::PlanarInduced => planar_direction(draw_square(r)),
        SphereDensity::Uniform => {
            let z: f64 = r.random_range(-1.0..=1.0);
            let phi: f64 = r.random_range(0.0..2.0 * PI);
            let rho = (1.0 - z * z).max(0.0).sqrt();
            [rho * phi.cos(), rho * phi.sin(), z]
        }
        SphereDensity::Circle => {
            let phi: f64 = r.random_range(0.0..2.0 * PI);
            [phi.cos(), phi.sin(), 0.0]
        }
        SphereDensity::Tabulated { cdf, cos_polar } => {
            let u: f64 = r.random();
            let z = interpolate(cdf, cos_polar, u).clamp(-1.0, 1.0);
            let phi: f64 = r.random_range(0.0..2.0 * PI);
            let rho = (1.0 - z * z).max(0.0).sqrt();
            [rho * phi.cos(), rho * phi.sin(), z]
        }
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    match xs.iter().position(|&v| v >= x) {
        None => *ys.last().unwrap(),
        Some(0) => ys[0],
        Some(i) => {
            let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            ys[i - 1] + t * (ys[i] - ys[i - 1])
        }
    }
}

/// Draws `n` sampling directions (and incident directions when requested).
pub fn draw_directions(n: usize, kind: &DirectionKind, seed: u64) -> Result<SamplingScheme> {
    if n == 0 {
        return Err(invalid("at least one direction is required"));
    }
    let mut r = rng(derive_label(seed, "sampling"));
    let mut ri = rng(derive_label(seed, "incident"));
    let (scheme_kind, wavenumber, incidence) = match kind {
        DirectionKind::PlanarFourier { wavenumber, incidence } => {
            (SchemeKind::PlanarFourierDirections, *wavenumber, *incidence)
        }
        DirectionKind::FarField { wavenumber, incidence, .. } => {
            (SchemeKind::FarFieldDirections, *wavenumber, *incidence)
        }
    };
    if let DirectionKind::FarField { density: SphereDensity::Tabulated { cdf, cos_polar }, .. } = kind {
        if cdf.len() != cos_polar.len() || cdf.len() < 2 || cdf.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("tabulated density needs two increasing columns of equal length"));
        }
    }
    let mut square_points = Vec::new();
    let mut sampling_points = Vec::with_capacity(n);
    let mut incident = match incidence {
        Incidence::Coincident => None,
        Incidence::Independent(m) if m == 0 => return Err(invalid("at least one incident direction is required")),
        Incidence::Independent(m) => Some(Vec::with_capacity(m)),
    };
    match kind {
        DirectionKind::PlanarFourier { .. } => {
            for _ in 0..n {
                let a = draw_square(&mut r);
                square_points.push(a);
                sampling_points.push(planar_direction(a));
            }
            if let (Some(inc), Incidence::Independent(m)) = (incident.as_mut(), incidence) {
                inc.extend((0..m).map(|_| planar_direction(draw_square(&mut ri))));
            }
        }
        DirectionKind::FarField { density, .. } => {
            sampling_points.extend((0..n).map(|_| draw_sphere(&mut r, density)));
            if let (Some(inc), Incidence::Independent(m)) = (incident.as_mut(), incidence) {
                inc.extend((0..m).map(|_| draw_sphere(&mut ri, density)));
            }
        }
    }
    Ok(SamplingScheme {
        kind: scheme_kind,
        sampling_points,
        square_points,
        incident_points: incident,
        wavenumber,
        aperture: None,
        z0: None,
        seed,
    })
}

/// Draws `n` transceivers uniformly on `[−A/2, A/2]²` in the plane `z = z₀`.
pub fn draw_sensors(n: usize, aperture: f64, z0: f64, wavenumber: f64, seed: u64) -> Result<SamplingScheme> {
    if n == 0 {
        return Err(invalid("at least one sensor is required"));
    }
    if !(aperture >= 0.0) {
        return Err(invalid("aperture must be nonnegative"));
    }
    let mut r = rng(derive_label(seed, "sensors"));
    let h = aperture / 2.0;
    let mut square_points = Vec::with_capacity(n);
    let sampling_points = (0..n)
        .map(|_| {
            let a = draw_square(&mut r);
            square_points.push(a);
            [a[0] * h, a[1] * h, z0]
        })
        .collect();
    Ok(SamplingScheme {
        kind: SchemeKind::ParaxialSensors,
        sampling_points,
        square_points,
        incident_points: None,
        wavenumber,
        aperture: Some(aperture),
        z0: Some(z0),
        seed,
    })
}

/// Draws `n` sample times uniformly with replacement from `{1, …, tones}`.
pub fn draw_times(n: usize, tones: usize, seed: u64) -> Result<SamplingScheme> {
    if n == 0 || tones == 0 {
        return Err(invalid("sample and tone counts must be positive"));
    }
    let mut r = rng(derive_label(seed, "times"));
    let sampling_points = (0..n).map(|_| [r.random_range(1..=tones) as f64, 0.0, 0.0]).collect();
    Ok(SamplingScheme {
        kind: SchemeKind::TimeSamples,
        sampling_points,
        square_points: Vec::new(),
        incident_points: None,
        wavenumber: 2.0 * PI,
        aperture: None,
        z0: None,
        seed,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel {
    /// `σ(e₁ + i e₂)·Y_max` entrywise with `e₁, e₂` uniform on `[−1, 1]`.
    UniformComplexRelative,
    /// A prescribed perturbation matrix.
    ExplicitMatrix(CMat),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    /// When set, the drawn perturbation is rescaled to this spectral norm.
    pub epsilon: Option<f64>,
    pub model: NoiseModel,
}

impl NoiseSpec {
    pub fn relative(sigma: f64) -> NoiseSpec {
        NoiseSpec { sigma, epsilon: None, model: NoiseModel::UniformComplexRelative }
    }

    /// Uniform complex perturbation rescaled to `‖E‖₂ = ε`.
    pub fn budget(epsilon: f64) -> NoiseSpec {
        NoiseSpec { sigma: 1.0, epsilon: Some(epsilon), model: NoiseModel::UniformComplexRelative }
    }

    pub fn explicit(e: CMat) -> NoiseSpec {
        NoiseSpec { sigma: 1.0, epsilon: None, model: NoiseModel::ExplicitMatrix(e) }
    }
}

/// Uniform complex noise `σ(e₁ + i e₂)·scale` of the given shape.
pub fn uniform_complex_noise(rows: usize, cols: usize, sigma: f64, scale: f64, seed: u64) -> CMat {
    let mut r = rng(seed);
    CMat::from_fn(rows, cols, |_, _| {
        let e1: f64 = r.random_range(-1.0..=1.0);
        let e2: f64 = r.random_range(-1.0..=1.0);
        C64::new(e1, e2) * (sigma * scale)
    })
}

/// Adds the perturbation described by `spec` and records `ε = ‖E‖₂`.
pub fn apply_noise(data: &DataMatrix, spec: &NoiseSpec, seed: u64) -> Result<DataMatrix> {
    if !(spec.sigma >= 0.0) {
        return Err(invalid("noise level must be nonnegative"));
    }
    if spec.epsilon.is_some_and(|e| !(e >= 0.0)) {
        return Err(invalid("noise budget must be nonnegative"));
    }
    let clean = data.clean();
    let (rows, cols) = clean.shape();
    let mut e = match &spec.model {
        NoiseModel::UniformComplexRelative => {
            if spec.sigma == 0.0 || spec.epsilon == Some(0.0) {
                CMat::zeros(rows, cols)
            } else {
                uniform_complex_noise(rows, cols, spec.sigma, max_abs(&clean), seed)
            }
        }
        NoiseModel::ExplicitMatrix(e) => {
            if e.shape() != (rows, cols) {
                return Err(Error::DimensionMismatch(format!(
                    "noise is {:?} but data is {:?}",
                    e.shape(),
                    (rows, cols)
                )));
            }
            e.clone()
        }
    };
    if let Some(target) = spec.epsilon {
        let now = spectral_norm(&e);
        if now > 0.0 {
            e *= C64::new(target / now, 0.0);
        }
    }
    let eps = spectral_norm(&e);
    let mut out = data.clone();
    out.y = &clean + &e;
    out.noise = Some(e);
    out.epsilon_realized = eps;
    Ok(out)
}

/// JSON document holding a grid, a scene and optionally a sampling scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneDocument {
    pub format: String,
    pub seed: u64,
    pub grid: Grid,
    pub scene: Scene,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SamplingScheme>,
}

pub const SCENE_FORMAT: &str = "scene/v1";

impl SceneDocument {
    pub fn new(grid: Grid, scene: Scene, scheme: Option<SamplingScheme>, seed: u64) -> Self {
        SceneDocument { format: SCENE_FORMAT.to_string(), seed, grid, scene, scheme }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SceneDocument = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if doc.format != SCENE_FORMAT {
            return Err(Error::Format(format!("unsupported format {:?}, expected {SCENE_FORMAT:?}", doc.format)));
        }
        if doc.scene.support.iter().any(|&j| j >= doc.grid.len()) {
            return Err(Error::Format("scene support outside the grid".into()));
        }
        let scene = Scene::new(doc.scene.support.clone(), doc.scene.amplitudes.clone())?;
        Ok(SceneDocument { scene, ..doc })
    }
}
