//! Sensing matrices and data matrices: Born far-field, exact and paraxial Green
//! kernels, Foldy–Lax multiple scattering and extended-object data.

use crate::error::{invalid, Error, Result};
use crate::linalg::{matmul, mul_adjoint, normalize_columns, select_columns, singular_values, CMat, CVec, C64};
use crate::scene::{distance, dot, Grid, SamplingScheme, Scene, SchemeKind};
use std::f64::consts::PI;

/// Diagonal–Fourier–diagonal factors of the paraxial sensing matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ParaxialFactors {
    /// Sensor-side phases `e^{iω(ξ²+η²)/(2z₀)}`.
    pub d1: CVec,
    /// Scaled Fourier factor `n^{−1/2} e^{−iω(ξx+ηy)/z₀}`.
    pub a: CMat,
    /// Object-side phases `e^{iω(x²+y²)/(2z₀)}`.
    pub d2: CVec,
}

impl ParaxialFactors {
    /// `D₁ A D₂`.
    pub fn product(&self) -> CMat {
        CMat::from_fn(self.a.nrows(), self.a.ncols(), |i, j| self.d1[i] * self.a[(i, j)] * self.d2[j])
    }
}

/// Sensing matrices on the whole grid and restricted to a support.
#[derive(Clone, Debug, PartialEq)]
pub struct SensingPair {
    /// `Φ = Φ̃_S` (n×s).
    pub phi: CMat,
    /// `Ψ = Ψ̃_S` (m×s).
    pub psi: CMat,
    /// `Φ̃` (n×N).
    pub phi_ext: CMat,
    /// `Ψ̃` (m×N).
    pub psi_ext: CMat,
    /// Whether columns were scaled to unit norm.
    pub normalized: bool,
    /// Column norms of `Φ̃` before normalization.
    pub phi_scale: Vec<f64>,
    /// Column norms of `Ψ̃` before normalization.
    pub psi_scale: Vec<f64>,
    /// Global physical prefactor dropped from the model; recorded only.
    pub prefactor: C64,
    pub support: Vec<usize>,
    pub paraxial: Option<ParaxialFactors>,
}

impl SensingPair {
    fn from_ext(phi_ext: CMat, psi_ext: CMat, phi_scale: Vec<f64>, psi_scale: Vec<f64>, prefactor: C64) -> Self {
        let n = phi_ext.nrows();
        let m = psi_ext.nrows();
        SensingPair {
            phi: CMat::zeros(n, 0),
            psi: CMat::zeros(m, 0),
            phi_ext,
            psi_ext,
            normalized: true,
            phi_scale,
            psi_scale,
            prefactor,
            support: Vec::new(),
            paraxial: None,
        }
    }

    /// Pair restricted to the given support.
    pub fn with_support(mut self, support: &[usize]) -> Result<Self> {
        if let Some(&j) = support.iter().find(|&&j| j >= self.n_points()) {
            return Err(Error::DimensionMismatch(format!("support index {j} outside {} grid points", self.n_points())));
        }
        self.phi = select_columns(&self.phi_ext, support);
        self.psi = select_columns(&self.psi_ext, support);
        self.support = support.to_vec();
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.phi_ext.nrows()
    }

    pub fn m(&self) -> usize {
        self.psi_ext.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.phi_ext.ncols()
    }
}

/// Data matrix `Y^ε = Y + E`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    /// Observed (possibly perturbed) data.
    pub y: CMat,
    pub noise: Option<CMat>,
    /// `‖E‖₂`.
    pub epsilon_realized: f64,
}

impl DataMatrix {
    pub fn noiseless(y: CMat) -> DataMatrix {
        DataMatrix { y, noise: None, epsilon_realized: 0.0 }
    }

    /// Data without the perturbation.
    pub fn clean(&self) -> CMat {
        match &self.noise {
            Some(e) => &self.y - e,
            None => self.y.clone(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.y.shape()
    }
}

fn require_positive_wavenumber(scheme: &SamplingScheme) -> Result<()> {
    if !(scheme.wavenumber > 0.0) || !scheme.wavenumber.is_finite() {
        return Err(invalid(format!("wavenumber must be positive, got {}", scheme.wavenumber)));
    }
    Ok(())
}

fn plane_wave_matrix(dirs: &[[f64; 3]], grid: &Grid, omega: f64) -> CMat {
    let scale = 1.0 / (dirs.len() as f64).sqrt();
    CMat::from_fn(dirs.len(), grid.len(), |k, j| C64::from_polar(scale, -omega * dot(&dirs[k], &grid.points[j])))
}

/// Born far-field pair `Φ̃_{kj} = n^{−1/2} e^{−iω ŝ_k·r_j}`, `Ψ̃_{lj} = m^{−1/2} e^{−iω d_l·r_j}`.
pub fn farfield_pair(grid: &Grid, scene: &Scene, scheme: &SamplingScheme) -> Result<SensingPair> {
    if !matches!(scheme.kind, SchemeKind::FarFieldDirections | SchemeKind::PlanarFourierDirections) {
        return Err(Error::DimensionMismatch(format!("{:?} scheme does not provide directions", scheme.kind)));
    }
    require_positive_wavenumber(scheme)?;
    if scheme.n() == 0 || scheme.m() == 0 {
        return Err(Error::DimensionMismatch("scheme has no directions".into()));
    }
    let omega = scheme.wavenumber;
    let phi_ext = plane_wave_matrix(&scheme.sampling_points, grid, omega);
    let psi_ext = plane_wave_matrix(scheme.incident(), grid, omega);
    let pair = SensingPair::from_ext(
        phi_ext,
        psi_ext,
        vec![1.0; grid.len()],
        vec![1.0; grid.len()],
        C64::new(omega * omega / (4.0 * PI), 0.0),
    );
    pair.with_support(&scene.support)
}

fn sensor_plane(scheme: &SamplingScheme) -> Result<f64> {
    if scheme.kind != SchemeKind::ParaxialSensors {
        return Err(invalid(format!("expected a sensor scheme, got {:?}", scheme.kind)));
    }
    require_positive_wavenumber(scheme)?;
    let z0 = scheme.z0.unwrap_or_else(|| scheme.sampling_points.first().map_or(0.0, |p| p[2]));
    Ok(z0)
}

/// Paraxial transceiver pair `Φ̃ = D₁ A D₂`, `Ψ̃ = conj(Φ̃)`.
pub fn paraxial_pair(grid: &Grid, scheme: &SamplingScheme) -> Result<SensingPair> {
    let z0 = sensor_plane(scheme)?;
    if z0 == 0.0 {
        return Err(invalid("paraxial kernel is singular at z0 = 0"));
    }
    let omega = scheme.wavenumber;
    let n = scheme.n();
    let sensors = &scheme.sampling_points;
    let d1 = CVec::from_fn(n, |k, _| {
        let (x, y) = (sensors[k][0], sensors[k][1]);
        C64::from_polar(1.0, omega * (x * x + y * y) / (2.0 * z0))
    });
    let d2 = CVec::from_fn(grid.len(), |j, _| {
        let p = grid.points[j];
        C64::from_polar(1.0, omega * (p[0] * p[0] + p[1] * p[1]) / (2.0 * z0))
    });
    let scale = 1.0 / (n as f64).sqrt();
    let a = CMat::from_fn(n, grid.len(), |k, j| {
        let (s, r) = (sensors[k], grid.points[j]);
        C64::from_polar(scale, -omega * (s[0] * r[0] + s[1] * r[1]) / z0)
    });
    let factors = ParaxialFactors { d1, a, d2 };
    let phi_ext = factors.product();
    let psi_ext = phi_ext.map(|z| z.conj());
    let prefactor = C64::from_polar(1.0 / (4.0 * PI * z0), omega * z0);
    let physical = (n as f64).sqrt() / (4.0 * PI * z0.abs());
    let mut pair = SensingPair::from_ext(
        phi_ext,
        psi_ext,
        vec![physical; grid.len()],
        vec![physical; grid.len()],
        prefactor,
    );
    pair.paraxial = Some(factors);
    Ok(pair)
}

/// Free-space Green function `e^{iω|x−y|}/(4π|x−y|)`.
pub fn green(omega: f64, x: &[f64; 3], y: &[f64; 3]) -> C64 {
    let r = distance(x, y);
    C64::from_polar(1.0 / (4.0 * PI * r), omega * r)
}

/// Unnormalized Green matrix `G(s_k, r_j)` for sensor positions `s_k`.
pub fn green_matrix(grid: &Grid, sensors: &[[f64; 3]], omega: f64) -> Result<CMat> {
    for (k, s) in sensors.iter().enumerate() {
        if let Some(j) = grid.points.iter().position(|p| distance(p, s) == 0.0) {
            return Err(Error::SingularKernel { sensor: k, point: j });
        }
    }
    Ok(CMat::from_fn(sensors.len(), grid.len(), |k, j| green(omega, &sensors[k], &grid.points[j])))
}

/// Transceiver pair from the exact Green function with unit columns; `Ψ̃ = conj(Φ̃)`.
pub fn exact_green_pair(grid: &Grid, scheme: &SamplingScheme) -> Result<SensingPair> {
    sensor_plane(scheme)?;
    let omega = scheme.wavenumber;
    let mut phi_ext = green_matrix(grid, &scheme.sampling_points, omega)?;
    let scale = normalize_columns(&mut phi_ext);
    let psi_ext = phi_ext.map(|z| z.conj());
    Ok(SensingPair::from_ext(phi_ext, psi_ext, scale.clone(), scale, C64::new(omega * omega, 0.0)))
}

/// Pair matching the scheme kind: plane waves for directions, the exact Green
/// function for sensors. Restricted to the scene support.
pub fn scheme_pair(grid: &Grid, scene: &Scene, scheme: &SamplingScheme) -> Result<SensingPair> {
    match scheme.kind {
        SchemeKind::FarFieldDirections | SchemeKind::PlanarFourierDirections => farfield_pair(grid, scene, scheme),
        SchemeKind::ParaxialSensors => exact_green_pair(grid, scheme)?.with_support(&scene.support),
        SchemeKind::TimeSamples => Err(invalid("time samples do not define a scattering pair")),
    }
}

/// Multiple-scattering system `(I − ω²GX)U = U^i` on the support.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldyLaxSystem {
    /// Coupling `G_{ij} = (1−δ_ij) G(r_j, r_i)` (s×s).
    pub g: CMat,
    /// Total fields at the scatterers (s×m).
    pub total_fields: CMat,
    /// Incident fields at the scatterers (s×m).
    pub incident_fields: CMat,
    pub wavenumber: f64,
    /// Norms of the incident-field rows, used to scale `Ψ` like its Born counterpart.
    pub incident_norms: Vec<f64>,
    pub condition: f64,
}

impl FoldyLaxSystem {
    /// Incidence-side matrix with entries `u*(r_j; d_l)` scaled like the Born `Ψ` (m×s).
    pub fn psi(&self) -> CMat {
        let (s, m) = self.total_fields.shape();
        CMat::from_fn(m, s, |l, j| self.total_fields[(j, l)].conj() / self.incident_norms[j])
    }
}

fn incident_fields(grid: &Grid, scene: &Scene, scheme: &SamplingScheme, omega: f64) -> Result<CMat> {
    let pts: Vec<[f64; 3]> = scene.support.iter().map(|&j| grid.points[j]).collect();
    let src = scheme.incident();
    match scheme.kind {
        SchemeKind::FarFieldDirections | SchemeKind::PlanarFourierDirections => {
            Ok(CMat::from_fn(pts.len(), src.len(), |j, l| C64::from_polar(1.0, omega * dot(&src[l], &pts[j]))))
        }
        SchemeKind::ParaxialSensors => {
            for (l, s) in src.iter().enumerate() {
                if let Some(j) = pts.iter().position(|p| distance(p, s) == 0.0) {
                    return Err(Error::SingularKernel { sensor: l, point: scene.support[j] });
                }
            }
            Ok(CMat::from_fn(pts.len(), src.len(), |j, l| green(omega, &pts[j], &src[l])))
        }
        SchemeKind::TimeSamples => Err(invalid("time samples carry no incident field")),
    }
}

/// Solves the Foldy–Lax system for the scene.
pub fn foldy_lax_solve(grid: &Grid, scene: &Scene, scheme: &SamplingScheme, omega: f64) -> Result<FoldyLaxSystem> {
    if !(omega > 0.0) {
        return Err(invalid("wavenumber must be positive"));
    }
    let s = scene.s();
    let pts: Vec<[f64; 3]> = scene.support.iter().map(|&j| grid.points[j]).collect();
    let g = CMat::from_fn(s, s, |i, j| if i == j { C64::new(0.0, 0.0) } else { green(omega, &pts[j], &pts[i]) });
    let ui = incident_fields(grid, scene, scheme, omega)?;
    let mut k = CMat::identity(s, s);
    for i in 0..s {
        for j in 0..s {
            k[(i, j)] -= g[(i, j)] * scene.amplitudes[j] * (omega * omega);
        }
    }
    let sv = singular_values(&k);
    let condition = match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    };
    if condition > 1e12 {
        return Err(Error::Resonance { condition });
    }
    let lu = k.clone().lu();
    let mut u = lu.solve(&ui).ok_or(Error::Resonance { condition })?;
    // One step of residual refinement.
    let r = &ui - matmul(&k, &u);
    if let Some(du) = lu.solve(&r) {
        u += du;
    }
    let incident_norms = ui.row_iter().map(|row| row.norm()).collect();
    Ok(FoldyLaxSystem { g, total_fields: u, incident_fields: ui, wavenumber: omega, incident_norms, condition })
}

/// How the incidence side of the data is formed.
#[derive(Clone, Copy, Debug)]
pub enum DataMode<'a> {
    Born,
    FoldyLax(&'a FoldyLaxSystem),
}

/// `Y = Φ X Ψ* = Σ_j ξ_j Φ_j ⊗ Ψ_j*`.
pub fn assemble_data(pair: &SensingPair, scene: &Scene, mode: DataMode<'_>) -> Result<DataMatrix> {
    let n = pair.n();
    let m = pair.m();
    if scene.support.iter().any(|&j| j >= pair.n_points()) {
        return Err(Error::DimensionMismatch("scene support outside the grid".into()));
    }
    let phi = select_columns(&pair.phi_ext, &scene.support);
    let psi = match mode {
        DataMode::Born => select_columns(&pair.psi_ext, &scene.support),
        DataMode::FoldyLax(sys) => {
            let p = sys.psi();
            if p.shape() != (m, scene.s()) {
                return Err(Error::DimensionMismatch(format!(
                    "Foldy-Lax fields are {:?}, expected {:?}",
                    p.shape(),
                    (m, scene.s())
                )));
            }
            p
        }
    };
    if scene.s() == 0 {
        return Ok(DataMatrix::noiseless(CMat::zeros(n, m)));
    }
    let mut phix = phi;
    for (mut c, a) in phix.column_iter_mut().zip(&scene.amplitudes) {
        c *= *a;
    }
    Ok(DataMatrix::noiseless(mul_adjoint(&phix, &psi)))
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Data of a piecewise-constant (indicator-spline) extended object whose cell
/// values are the scene amplitudes, deconvolved by the spline transform and
/// normalized so that it coincides with Born data on the far-field pair.
pub fn extended_object_data(grid: &Grid, scene: &Scene, scheme: &SamplingScheme) -> Result<DataMatrix> {
    if !matches!(scheme.kind, SchemeKind::FarFieldDirections | SchemeKind::PlanarFourierDirections) {
        return Err(invalid("extended-object data requires far-field directions"));
    }
    require_positive_wavenumber(scheme)?;
    let omega = scheme.wavenumber;
    let ell = grid.spacing;
    let d = grid.dim;
    let sdirs = &scheme.sampling_points;
    let ddirs = scheme.incident();
    let (n, m) = (sdirs.len(), ddirs.len());
    let cell = ell.powi(d as i32);
    let mut y = CMat::zeros(n, m);
    for k in 0..n {
        for l in 0..m {
            let q = [ddirs[l][0] - sdirs[k][0], ddirs[l][1] - sdirs[k][1], ddirs[l][2] - sdirs[k][2]];
            // ℓ^d (2π)^{d/2} ĝ(ℓω(d_l − ŝ_k)) for the unit-cell indicator.
            let transform: f64 = (0..d).map(|i| sinc(ell * omega * q[i] / 2.0)).product::<f64>() * cell;
            if transform.abs() < 1e-12 * cell {
                return Err(Error::Deconvolution { k, l });
            }
            let raw: C64 = scene
                .support
                .iter()
                .zip(&scene.amplitudes)
                .map(|(&j, &xi)| xi * C64::from_polar(transform, omega * dot(&q, &grid.points[j])))
                .sum();
            y[(k, l)] = raw / transform / ((n * m) as f64).sqrt();
        }
    }
    Ok(DataMatrix::noiseless(y))
}

/// Numerical rank: singular values above `rel · σ₁`.
pub fn numerical_rank(y: &CMat, rel: f64) -> usize {
    let sv = singular_values(y);
    let top = sv.first().cloned().unwrap_or(0.0);
    sv.iter().filter(|&&v| v > rel * top && top > 0.0).count()
}
