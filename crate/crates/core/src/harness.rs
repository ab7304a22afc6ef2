//! Seeded Monte Carlo sweeps over the planar transceiver setup: single trials,
//! success curves with Wilson intervals, recoverable-sparsity curves and exports.

use crate::analysis::{gamma_exact, mutual_coherence, quantile, ric_set};
use crate::error::{invalid, Error, Result};
use crate::forward::{assemble_data, exact_green_pair, paraxial_pair, DataMatrix, DataMode, SensingPair};
use crate::linalg::{CMat, CVec, C64};
use crate::music::{decompose, imaging_function, top_peaks, with_threshold, ImagingResult, RankRule, ThresholdRule};
use crate::rng::{derive, derive_label};
use crate::scene::{apply_noise, draw_scene, draw_sensors, Grid, NoiseSpec, SamplingScheme, Scene};
use crate::solvers::{bpdn_solve, omp_solve, BpdnOptions, SparseProblem};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Recovery method under test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Music,
    /// BPDN on the vectorized full data matrix.
    BpdnFullMatrix,
    /// BPDN on the first column of the data matrix.
    BpdnSingleColumn,
    /// OMP on the first column, stopped after `s` atoms.
    Omp,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Music => "music",
            Method::BpdnFullMatrix => "bpdn-full-matrix",
            Method::BpdnSingleColumn => "bpdn-single-column",
            Method::Omp => "omp",
        }
    }
}

/// Kernel used to build the imaging steering vectors; data always use the exact kernel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    #[default]
    Exact,
    Paraxial,
}

/// How MUSIC turns the imaging function into a support.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportChoice {
    /// The `s` largest peaks.
    #[default]
    TopPeaks,
    /// `J ≥ 2Γ_S⁻²` with the exact `Γ_S` of the drawn scene.
    Gamma,
    /// `J ≥ 2L⁻²` with set-restricted constants of the drawn scene.
    Ric,
    /// `J ≥ 128/25`.
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Geometry {
    pub z0: f64,
    pub wavelength: f64,
    /// Grid points per side; the search domain is centered at the origin.
    pub side: usize,
    pub spacing: f64,
    pub aperture: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry { z0: 10_000.0, wavelength: 0.1, side: 50, spacing: 10.0, aperture: 100.0 }
    }
}

impl Geometry {
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    /// `Aℓ/(λz₀)`; one at the Rayleigh resolution.
    pub fn resolution_ratio(&self) -> f64 {
        self.aperture * self.spacing / (self.wavelength * self.z0)
    }

    pub fn grid(&self) -> Result<Grid> {
        Ok(Grid::planar(self.side, self.spacing)?.centered())
    }
}

/// Parameters of empirical tail-quantile checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TailParams {
    pub k: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for TailParams {
    fn default() -> Self {
        TailParams { k: 1.0, alpha: 0.05, gamma: 0.05 }
    }
}

/// Quantity swept along a success curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Aperture,
    Sensors,
    Noise,
    Sparsity,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Aperture => "aperture",
            Axis::Sensors => "sensors",
            Axis::Noise => "noise",
            Axis::Sparsity => "sparsity",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axis: Axis,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub geometry: Geometry,
    /// Transceivers (`m = n`).
    pub n: usize,
    pub s: usize,
    pub trials: usize,
    /// Current noise level of the relative uniform model.
    pub sigma: f64,
    /// Noise levels for a noise sweep when no explicit sweep is given.
    pub sigmas: Vec<f64>,
    pub method: Method,
    pub threshold: SupportChoice,
    pub kernel: Kernel,
    /// Amplitude range of the drawn scatterers.
    pub amplitudes: (f64, f64),
    pub tail: TailParams,
    pub bpdn: BpdnOptions,
    pub sweep: Option<Sweep>,
    /// Fraction of exact trials needed for a sparsity to count as recoverable.
    pub pass_rate: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            geometry: Geometry::default(),
            n: 10,
            s: 1,
            trials: 100,
            sigma: 0.0,
            sigmas: Vec::new(),
            method: Method::Music,
            threshold: SupportChoice::TopPeaks,
            kernel: Kernel::Exact,
            amplitudes: (1.0, 2.0),
            tail: TailParams::default(),
            bpdn: BpdnOptions { tol: 1e-6, max_iters: 200, rho: None, certify_every: 0 },
            sweep: None,
            pass_rate: 0.9,
            seed: 0,
        }
    }
}

/// Named aperture-sweep panels: `(n, s)` pairs.
pub const APERTURE_PRESETS: [(&str, usize, usize); 3] =
    [("few-sensors", 10, 9), ("sparse-scene", 100, 9), ("dense-scene", 60, 59)];

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        for (name, v) in [("z0", g.z0), ("wavelength", g.wavelength), ("spacing", g.spacing)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(g.aperture >= 0.0) {
            return Err(invalid(format!("aperture must be nonnegative, got {}", g.aperture)));
        }
        if g.side == 0 || self.n == 0 || self.s == 0 {
            return Err(invalid("side, n and s must be positive"));
        }
        if self.trials == 0 {
            return Err(invalid("at least one trial is required"));
        }
        if self.s > g.side * g.side {
            return Err(invalid(format!("s = {} exceeds the {} grid points", self.s, g.side * g.side)));
        }
        if !(self.sigma >= 0.0) || self.sigmas.iter().any(|s| !(*s >= 0.0)) {
            return Err(invalid("noise levels must be nonnegative"));
        }
        let (lo, hi) = self.amplitudes;
        if !(lo > 0.0 && hi >= lo) {
            return Err(invalid(format!("amplitude range ({lo}, {hi}) is invalid")));
        }
        if !(self.pass_rate > 0.0 && self.pass_rate <= 1.0) {
            return Err(invalid(format!("pass rate must lie in (0, 1], got {}", self.pass_rate)));
        }
        Ok(())
    }

    /// Aperture-sweep preset by name.
    pub fn aperture_preset(name: &str, apertures: Vec<f64>) -> Result<Self> {
        let &(_, n, s) = APERTURE_PRESETS
            .iter()
            .find(|(p, _, _)| *p == name)
            .ok_or_else(|| invalid(format!("unknown preset {name}")))?;
        Ok(ExperimentConfig { n, s, sweep: Some(Sweep { axis: Axis::Aperture, values: apertures }), ..Default::default() })
    }

    /// Copy with one swept quantity set.
    pub fn at(&self, axis: Axis, value: f64) -> Result<Self> {
        let mut c = self.clone();
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(invalid(format!("{} must be a positive integer, got {value}", axis.name())))
            }
        };
        match axis {
            Axis::Aperture => c.geometry.aperture = value,
            Axis::Noise => c.sigma = value,
            Axis::Sensors => c.n = count()?,
            Axis::Sparsity => c.s = count()?,
        }
        Ok(c)
    }

    /// Seed of trial `t` at this parameter point. Independent of the method so
    /// that methods see identical scenes and noise.
    pub fn trial_seed(&self, t: usize) -> u64 {
        let g = &self.geometry;
        let mut h = self.seed;
        for v in [self.n as u64, self.s as u64, g.aperture.to_bits(), self.sigma.to_bits()] {
            h = derive(h, v);
        }
        derive(h, t as u64)
    }

    /// Successes out of `trials` needed to pass.
    pub fn required(&self) -> usize {
        ((self.pass_rate * self.trials as f64) - 1e-9).ceil().max(1.0) as usize
    }

    /// Hex digest of the canonical JSON form, used to name result directories.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).unwrap_or_default();
        format!("{:016x}", derive_label(0, &text))
    }
}

/// Measured quantities of one trial.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `‖E‖₂`.
    pub epsilon: f64,
    /// `σ_s(Y^ε)` for MUSIC.
    pub sigma_s: Option<f64>,
    /// `σ_s/σ_{s+1}` for MUSIC.
    pub gap: Option<f64>,
    /// Threshold applied by MUSIC threshold rules.
    pub threshold: Option<f64>,
    pub solver_iterations: Option<usize>,
    pub tie_broken: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub truth: Vec<usize>,
    pub recovered: Vec<usize>,
    pub exact: bool,
    /// Stage error that turned the trial into a failure.
    pub failure: Option<String>,
    pub diagnostics: Diagnostics,
}

/// One drawn instance: grid, sensors, scene, noisy exact-kernel data and the
/// imaging pair selected by the configured kernel.
#[derive(Clone, Debug)]
pub struct Instance {
    pub grid: Grid,
    pub scheme: SamplingScheme,
    pub scene: Scene,
    pub data: DataMatrix,
    pub pair: SensingPair,
}

/// Draws the instance that trial `seed` of `config` runs on.
pub fn draw_instance(config: &ExperimentConfig, seed: u64) -> Result<Instance> {
    config.validate()?;
    let grid = config.geometry.grid()?;
    draw_on(config, grid, seed)
}

fn draw_on(config: &ExperimentConfig, grid: Grid, seed: u64) -> Result<Instance> {
    let g = &config.geometry;
    let scheme = draw_sensors(config.n, g.aperture, g.z0, g.wavenumber(), derive_label(seed, "sensors"))?;
    let scene = draw_scene(&grid, config.s, config.amplitudes, derive_label(seed, "scene"))?;
    let data_pair = exact_green_pair(&grid, &scheme)?.with_support(&scene.support)?;
    let clean = assemble_data(&data_pair, &scene, DataMode::Born)?;
    let data = apply_noise(&clean, &NoiseSpec::relative(config.sigma), derive_label(seed, "noise"))?;
    let pair = match config.kernel {
        Kernel::Exact => data_pair,
        Kernel::Paraxial => paraxial_pair(&grid, &scheme)?.with_support(&scene.support)?,
    };
    Ok(Instance { grid, scheme, scene, data, pair })
}

struct Drawn {
    scene: Scene,
    pair: SensingPair,
    y: CMat,
    epsilon: f64,
}

fn draw(config: &ExperimentConfig, grid: &Grid, seed: u64) -> Result<Drawn> {
    let inst = draw_on(config, grid.clone(), seed)?;
    Ok(Drawn { scene: inst.scene, pair: inst.pair, epsilon: inst.data.epsilon_realized, y: inst.data.y })
}

/// MUSIC with rank `s` on `y` and the support picked by `choice`. The Γ and RIC
/// thresholds use constants of the true support `truth`.
pub fn music_image(
    y: &CMat,
    pair: &SensingPair,
    truth: &[usize],
    s: usize,
    choice: SupportChoice,
    diag: &mut Diagnostics,
) -> Result<ImagingResult> {
    let dec = decompose(y, RankRule::Fixed(s))?;
    diag.sigma_s = s.checked_sub(1).and_then(|k| dec.singular_values.get(k)).copied();
    diag.gap = Some(dec.gap);
    let img = imaging_function(&dec, pair)?;
    let rule = match choice {
        SupportChoice::TopPeaks => {
            let top = top_peaks(&img, s);
            diag.tie_broken = top.tie_broken;
            return Ok(top);
        }
        SupportChoice::Gamma => ThresholdRule::Gamma(gamma_exact(pair, truth, None)?.gamma),
        SupportChoice::Ric => {
            let mut with_next = truth.to_vec();
            with_next.extend((0..pair.n_points()).find(|j| !truth.contains(j)));
            let lo = ric_set(&pair.phi_ext, &with_next)?;
            let hi = ric_set(&pair.phi_ext, truth)?;
            ThresholdRule::Ric { delta_minus_s1: lo.delta_minus, delta_plus_s: hi.delta_plus }
        }
        SupportChoice::Fixed => ThresholdRule::Fixed,
    };
    diag.threshold = Some(rule.tau()?);
    with_threshold(&img, rule)
}

fn music_support(config: &ExperimentConfig, d: &Drawn, diag: &mut Diagnostics) -> Result<Vec<usize>> {
    Ok(music_image(&d.y, &d.pair, &d.scene.support, config.s, config.threshold, diag)?.recovered_support)
}

/// Vectorized dictionary `vec(φ_j ψ_jᴴ)` with unit columns. When the data
/// matrix is symmetric only the upper triangle is kept, off-diagonal entries
/// weighted by √2, which preserves all inner products.
fn full_matrix_problem(d: &Drawn, eps_scale: f64) -> Result<SparseProblem> {
    let (n, m) = d.y.shape();
    let phi = &d.pair.phi_ext;
    let psi = &d.pair.psi_ext;
    let symmetric = n == m && (&d.y - d.y.transpose()).norm() <= 1e-12 * d.y.norm() && phi.map(|z| z.conj()) == *psi;
    let rows: Vec<(usize, usize, f64)> = if symmetric {
        (0..n).flat_map(|k| (k..n).map(move |l| (k, l, if k == l { 1.0 } else { std::f64::consts::SQRT_2 }))).collect()
    } else {
        (0..n).flat_map(|k| (0..m).map(move |l| (k, l, 1.0))).collect()
    };
    let mut a = CMat::from_fn(rows.len(), phi.ncols(), |r, j| {
        let (k, l, w) = rows[r];
        phi[(k, j)] * psi[(l, j)].conj() * w
    });
    for mut col in a.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 {
            col /= C64::new(nrm, 0.0);
        }
    }
    let b = CVec::from_iterator(rows.len(), rows.iter().map(|&(k, l, w)| d.y[(k, l)] * w));
    SparseProblem::new(a, b, eps_scale)
}

fn column_problem(d: &Drawn, noise_col: f64) -> Result<SparseProblem> {
    SparseProblem::new(d.pair.phi_ext.clone(), d.y.column(0).into_owned(), noise_col)
}

fn run_drawn(config: &ExperimentConfig, d: &Drawn, clean_y: Option<&CMat>, diag: &mut Diagnostics) -> Result<Vec<usize>> {
    let s = config.s;
    let noise = |c: Option<usize>| -> f64 {
        clean_y.map_or(0.0, |y0| match c {
            Some(c) => (d.y.column(c) - y0.column(c)).norm(),
            None => (&d.y - y0).norm(),
        })
    };
    match config.method {
        Method::Music => music_support(config, d, diag),
        Method::BpdnFullMatrix => {
            let p = full_matrix_problem(d, noise(None))?;
            let sol = bpdn_solve(&p, &config.bpdn)?;
            diag.solver_iterations = Some(sol.iterations);
            Ok(sol.top_support(s))
        }
        Method::BpdnSingleColumn => {
            let p = column_problem(d, noise(Some(0)))?;
            let sol = bpdn_solve(&p, &config.bpdn)?;
            diag.solver_iterations = Some(sol.iterations);
            Ok(sol.top_support(s))
        }
        Method::Omp => {
            let p = column_problem(d, noise(Some(0)))?;
            let sol = omp_solve(&p, s)?;
            diag.solver_iterations = Some(sol.iterations);
            diag.tie_broken = sol.tie_broken;
            let mut supp = sol.support.clone();
            supp.sort_unstable();
            Ok(supp)
        }
    }
}

fn trial_on(config: &ExperimentConfig, grid: &Grid, seed: u64) -> TrialOutcome {
    let mut diag = Diagnostics::default();
    let mut truth = Vec::new();
    let result = draw(config, grid, seed).and_then(|d| {
        truth = d.scene.support.clone();
        diag.epsilon = d.epsilon;
        let clean = if d.epsilon > 0.0 {
            let y0 = d.pair.phi.clone() * CMat::from_diagonal(&CVec::from_vec(d.scene.amplitudes.clone())) * d.pair.psi.adjoint();
            Some(y0)
        } else {
            None
        };
        run_drawn(config, &d, clean.as_ref(), &mut diag)
    });
    match result {
        Ok(mut recovered) => {
            recovered.sort_unstable();
            let exact = recovered == truth;
            TrialOutcome { seed, truth, recovered, exact, failure: None, diagnostics: diag }
        }
        Err(e) => TrialOutcome { seed, truth, recovered: Vec::new(), exact: false, failure: Some(e.to_string()), diagnostics: diag },
    }
}

/// One end-to-end draw: sensors, scene, exact-kernel data, noise, method, comparison.
/// Stage errors are recorded in the outcome.
pub fn run_trial(config: &ExperimentConfig, seed: u64) -> TrialOutcome {
    if let Err(e) = config.validate() {
        return TrialOutcome {
            seed,
            truth: Vec::new(),
            recovered: Vec::new(),
            exact: false,
            failure: Some(e.to_string()),
            diagnostics: Diagnostics::default(),
        };
    }
    match config.geometry.grid() {
        Ok(grid) => trial_on(config, &grid, seed),
        Err(e) => TrialOutcome {
            seed,
            truth: Vec::new(),
            recovered: Vec::new(),
            exact: false,
            failure: Some(e.to_string()),
            diagnostics: Diagnostics::default(),
        },
    }
}

/// All `trials` outcomes at one parameter point, in trial order.
pub fn run_point(config: &ExperimentConfig) -> Result<Vec<TrialOutcome>> {
    config.validate()?;
    let grid = config.geometry.grid()?;
    Ok((0..config.trials).into_par_iter().map(|t| trial_on(config, &grid, config.trial_seed(t))).collect())
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    pub lo: f64,
    pub hi: f64,
    /// Trials that ended in a stage error.
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessCurve {
    pub axis: Axis,
    pub method: Method,
    pub points: Vec<CurvePoint>,
    /// Set when a single trial per point makes the intervals uninformative.
    pub degenerate: bool,
}

impl SuccessCurve {
    pub fn rates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.rate).collect()
    }
}

fn point_from(x: f64, outcomes: &[TrialOutcome]) -> CurvePoint {
    let trials = outcomes.len();
    let successes = outcomes.iter().filter(|o| o.exact).count();
    let (lo, hi) = if trials < 2 { (0.0, 1.0) } else { wilson_interval(successes, trials) };
    CurvePoint {
        x,
        successes,
        trials,
        rate: successes as f64 / trials as f64,
        lo,
        hi,
        failures: outcomes.iter().filter(|o| o.failure.is_some()).count(),
    }
}

/// Success probability along `axis`, `trials` independent draws per point.
pub fn success_curve(config: &ExperimentConfig, axis: Axis, values: &[f64]) -> Result<SuccessCurve> {
    if values.len() < 2 {
        return Err(invalid("a success curve needs at least two sweep points"));
    }
    config.validate()?;
    let grid = config.geometry.grid()?;
    let points: Vec<ExperimentConfig> = values.iter().map(|&v| config.at(axis, v)).collect::<Result<_>>()?;
    for p in &points {
        p.validate()?;
    }
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|i| (0..config.trials).map(move |t| (i, t))).collect();
    let outcomes: Vec<TrialOutcome> =
        jobs.par_iter().map(|&(i, t)| trial_on(&points[i], &grid, points[i].trial_seed(t))).collect();
    let points = outcomes.chunks(config.trials).zip(values).map(|(o, &x)| point_from(x, o)).collect();
    Ok(SuccessCurve { axis, method: config.method, points, degenerate: config.trials < 2 })
}

/// Whether at least [`ExperimentConfig::required`] trials succeed, stopping as soon as the answer is known.
pub fn passes(config: &ExperimentConfig, grid: &Grid) -> bool {
    let need = config.required();
    let chunk = (2 * rayon::current_num_threads()).max(4);
    let (mut ok, mut bad) = (0, 0);
    let mut t = 0;
    while t < config.trials {
        let end = (t + chunk).min(config.trials);
        let wins = (t..end).into_par_iter().filter(|&i| trial_on(config, grid, config.trial_seed(i)).exact).count();
        ok += wins;
        bad += end - t - wins;
        t = end;
        if ok >= need {
            return true;
        }
        if bad > config.trials - need {
            return false;
        }
    }
    ok >= need
}

/// Largest sparsity the method can use and still pass, for a fixed sensor count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityPoint {
    pub n: usize,
    pub s_max: usize,
}

fn sparsity_ceiling(method: Method, n: usize, n_points: usize) -> usize {
    let cap = match method {
        Method::Music => n.saturating_sub(1),
        Method::BpdnFullMatrix => n * (n + 1) / 2,
        Method::BpdnSingleColumn | Method::Omp => n,
    };
    cap.min(n_points)
}

/// Bisection over `s` for the largest value passing [`passes`],
/// assuming success is monotone in `s`.
pub fn max_sparsity(config: &ExperimentConfig, n: usize, method: Method) -> Result<usize> {
    let mut c = config.clone();
    c.n = n;
    c.method = method;
    c.s = 1;
    c.validate()?;
    let grid = c.geometry.grid()?;
    let ceiling = sparsity_ceiling(method, n, grid.len());
    let test = |s: usize| {
        let mut cs = c.clone();
        cs.s = s;
        passes(&cs, &grid)
    };
    if ceiling == 0 || !test(1) {
        return Ok(0);
    }
    if test(ceiling) {
        return Ok(ceiling);
    }
    let (mut lo, mut hi) = (1, ceiling);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if test(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `s_max(n)` for each sensor count.
pub fn recoverable_sparsity(config: &ExperimentConfig, ns: &[usize], method: Method) -> Result<Vec<SparsityPoint>> {
    ns.iter().map(|&n| Ok(SparsityPoint { n, s_max: max_sparsity(config, n, method)? })).collect()
}

/// Least-squares slope of `log y` against `log x` over positive pairs.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    linear_slope(&pts)
}

/// Least-squares slope of `y` against `x`.
pub fn linear_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Empirical coherence tail: the `1 − γ` quantile of `μ(Φ̃)` over sensor draws
/// against `K/√n`, scaled by `√(ln(N/α))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub draws: usize,
    pub level: f64,
    pub quantile: f64,
    pub reference: f64,
    pub below: bool,
}

pub fn coherence_tail(config: &ExperimentConfig, draws: usize) -> Result<TailReport> {
    config.validate()?;
    if draws == 0 {
        return Err(invalid("at least one draw is required"));
    }
    let t = &config.tail;
    if !(t.gamma > 0.0 && t.gamma < 1.0 && t.alpha > 0.0 && t.k > 0.0) {
        return Err(invalid("tail parameters need K > 0, α > 0 and γ in (0, 1)"));
    }
    let g = &config.geometry;
    let grid = g.grid()?;
    let mus: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let seed = derive_label(derive(config.seed, i as u64), "tail");
            let scheme = draw_sensors(config.n, g.aperture, g.z0, g.wavenumber(), seed)?;
            Ok(mutual_coherence(&exact_green_pair(&grid, &scheme)?.phi_ext)?.mu)
        })
        .collect::<Result<_>>()?;
    let level = 1.0 - t.gamma;
    let q = quantile(&mus, level).ok_or_else(|| invalid("no coherence samples"))?;
    let reference = t.k * ((grid.len() as f64 / t.alpha).ln() / config.n as f64).sqrt();
    Ok(TailReport { draws, level, quantile: q, reference, below: q <= reference })
}

/// Export format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

/// CSV with columns `axis,success,lo,hi,trials`.
pub fn curve_csv(curve: &SuccessCurve) -> String {
    let mut out = String::from("axis,success,lo,hi,trials\n");
    for p in &curve.points {
        let _ = writeln!(out, "{},{},{},{},{}", p.x, p.rate, p.lo, p.hi, p.trials);
    }
    out
}

/// Line chart of the curves with interval bars.
pub fn curve_svg(curves: &[SuccessCurve]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let xs = curves.iter().flat_map(|c| c.points.iter().map(|p| p.x));
    let (xmin, xmax) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let span = if xmax > xmin { xmax - xmin } else { 1.0 };
    let px = |x: f64| PAD + (x - xmin) / span * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - y * (H - 2.0 * PAD);
    let mut out = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n");
    let _ = writeln!(out, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<path d=\"M{PAD} {PAD} L{PAD} {b} L{r} {b}\" stroke=\"black\" fill=\"none\"/>",
        b = H - PAD,
        r = W - PAD
    );
    for tick in [0.0, 0.5, 1.0] {
        let _ = writeln!(out, "<text x=\"{}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{tick}</text>", PAD - 6.0, py(tick) + 4.0);
    }
    for (x, anchor) in [(xmin, "start"), (xmax, "end")] {
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{}\" font-size=\"11\" text-anchor=\"{anchor}\">{x}</text>", px(x), H - PAD + 16.0);
    }
    for (i, c) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = c
            .points
            .iter()
            .enumerate()
            .map(|(k, p)| format!("{}{:.1} {:.1}", if k == 0 { 'M' } else { 'L' }, px(p.x), py(p.rate)))
            .collect();
        let _ = writeln!(out, "<path d=\"{}\" stroke=\"{color}\" fill=\"none\" stroke-width=\"2\"/>", path.join(" "));
        for p in &c.points {
            let _ = writeln!(
                out,
                "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"{color}\"/>",
                py(p.lo),
                py(p.hi),
                x = px(p.x)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{} vs {}</text>",
            W - PAD - 150.0,
            PAD + 16.0 * i as f64,
            c.method.name(),
            c.axis.name()
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Renders the curves in the given format. The CSV form concatenates curves.
pub fn render(curves: &[SuccessCurve], format: Format) -> Result<String> {
    if curves.is_empty() || curves.iter().all(|c| c.points.is_empty()) {
        return Err(invalid("no results to export"));
    }
    Ok(match format {
        Format::Csv => {
            let mut out = curve_csv(&curves[0]);
            for c in &curves[1..] {
                out.extend(curve_csv(c).lines().skip(1).map(|l| format!("{l}\n")));
            }
            out
        }
        Format::Json => serde_json::to_string_pretty(curves).map_err(|e| Error::Format(e.to_string()))? + "\n",
        Format::Svg => curve_svg(curves),
    })
}

/// Writes `curves.<ext>` for each format under `dir`; nothing is written for empty results.
pub fn export(curves: &[SuccessCurve], formats: &[Format], dir: &Path) -> Result<Vec<PathBuf>> {
    let rendered: Vec<(Format, String)> = formats.iter().map(|&f| Ok((f, render(curves, f)?))).collect::<Result<_>>()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.display().to_string(), message: e.to_string() })?;
    rendered
        .into_iter()
        .map(|(f, text)| {
            let path = dir.join(format!("curves.{}", f.extension()));
            std::fs::write(&path, text).map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
            Ok(path)
        })
        .collect()
}

/// `<root>/<config hash>`.
pub fn results_dir(root: &Path, config: &ExperimentConfig) -> PathBuf {
    root.join(config.hash())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig { geometry: Geometry { side: 10, ..Default::default() }, n: 6, s: 2, trials: 4, ..Default::default() }
    }

    #[test]
    fn wilson_contains_estimate() {
        for (k, n) in [(0, 10), (3, 10), (10, 10), (50, 100), (1, 1)] {
            let (lo, hi) = wilson_interval(k, n);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi && lo >= 0.0 && hi <= 1.0);
        }
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }

    #[test]
    fn noiseless_single_scatterer() {
        let c = ExperimentConfig { s: 1, n: 10, ..tiny() };
        let o = run_trial(&c, 3);
        assert!(o.exact, "{o:?}");
    }

    #[test]
    fn errors_become_failures() {
        let c = ExperimentConfig { s: 6, n: 6, ..tiny() };
        let o = run_trial(&c, 1);
        assert!(!o.exact);
        assert!(o.failure.is_some());
        let bad = ExperimentConfig { trials: 0, ..tiny() };
        assert!(run_trial(&bad, 0).failure.is_some());
    }

    #[test]
    fn seeds_ignore_method() {
        let a = tiny();
        let b = ExperimentConfig { method: Method::Omp, ..tiny() };
        assert_eq!(a.trial_seed(2), b.trial_seed(2));
        assert_ne!(a.trial_seed(2), a.trial_seed(3));
        let oa = run_trial(&a, 11);
        let ob = run_trial(&b, 11);
        assert_eq!(oa.truth, ob.truth);
    }

    #[test]
    fn degenerate_single_trial() {
        let c = ExperimentConfig { trials: 1, ..tiny() };
        let curve = success_curve(&c, Axis::Noise, &[0.0, 0.1]).unwrap();
        assert!(curve.degenerate);
        assert!(curve.points.iter().all(|p| p.lo == 0.0 && p.hi == 1.0));
        assert!(success_curve(&c, Axis::Noise, &[0.0]).is_err());
    }

    #[test]
    fn export_rejects_empty() {
        let dir = std::env::temp_dir().join(format!("harness-empty-{}", std::process::id()));
        assert!(export(&[], &[Format::Csv], &dir).is_err());
        assert!(!dir.exists());
    }

    #[test]
    fn slopes() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0].iter().map(|&x| (x, 3.0 * x * x)).collect();
        assert!((loglog_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert!((linear_slope(&[(0.0, 1.0), (2.0, 5.0)]).unwrap() - 2.0).abs() < 1e-12);
    }
}
