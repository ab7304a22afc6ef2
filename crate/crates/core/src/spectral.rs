//! Multi-tone spectral estimation and source localization by covariance MUSIC.

use crate::error::{invalid, Error, Result};
use crate::forward::SensingPair;
use crate::linalg::{mul_adjoint, CMat, C64};
use crate::music::{decompose, imaging_on, top_peaks, RankRule};
use crate::rng::{derive_label, rng};
use crate::scene::Grid;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

/// Random multi-tone signal `x(t) = Σ_j a_j e^{−2πi ω_j t}` with `ω_j = j/N`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalModel {
    /// Number of tones `N`.
    pub tones: usize,
    /// Active tones as zero-based indices; index `i` has frequency `(i+1)/N`.
    pub support: Vec<usize>,
    /// `E|a_j|²` for each active tone.
    pub variances: Vec<f64>,
    /// Sample times `t_k ∈ {1, …, N}`.
    pub times: Vec<usize>,
    pub realizations: usize,
}

impl SignalModel {
    pub fn new(tones: usize, support: Vec<usize>, variances: Vec<f64>, times: Vec<usize>, realizations: usize) -> Result<Self> {
        if times.is_empty() || realizations == 0 {
            return Err(invalid("need at least one sample time and one realization"));
        }
        if support.len() != variances.len() {
            return Err(Error::DimensionMismatch("one variance per active tone is required".into()));
        }
        if support.iter().any(|&j| j >= tones) {
            return Err(invalid("active tone outside the frequency grid"));
        }
        if variances.iter().any(|&v| !(v > 0.0)) {
            return Err(invalid("tone variances must be positive"));
        }
        Ok(SignalModel { tones, support, variances, times, realizations })
    }

    /// Frequency of a zero-based tone index.
    pub fn frequency(&self, j: usize) -> f64 {
        (j + 1) as f64 / self.tones as f64
    }

    /// Unit-modulus tone matrix `e^{−2πi t_k ω_j}` (n×N).
    pub fn tone_matrix(&self) -> CMat {
        CMat::from_fn(self.times.len(), self.tones, |k, j| {
            C64::from_polar(1.0, -2.0 * PI * self.times[k] as f64 * self.frequency(j))
        })
    }

    /// Normalized steering matrix `Φ̃ = n^{−1/2}` × tone matrix.
    pub fn steering(&self) -> CMat {
        self.tone_matrix() / C64::new((self.times.len() as f64).sqrt(), 0.0)
    }
}

/// Random model: `s` active tones out of `N` with unit variances, observed at
/// `n` distinct times drawn from `{1, …, N}`.
pub fn draw_model(tones: usize, s: usize, n: usize, realizations: usize, seed: u64) -> Result<SignalModel> {
    if s > tones || n > tones || n == 0 {
        return Err(invalid(format!("need s ≤ N and 1 ≤ n ≤ N, got s = {s}, n = {n}, N = {tones}")));
    }
    let mut gs = rng(derive_label(seed, "support"));
    let mut gt = rng(derive_label(seed, "times"));
    let mut support = rand::seq::index::sample(&mut gs, tones, s).into_vec();
    support.sort_unstable();
    let mut times: Vec<usize> = rand::seq::index::sample(&mut gt, tones, n).into_iter().map(|t| t + 1).collect();
    times.sort_unstable();
    SignalModel::new(tones, support, vec![1.0; s], times, realizations)
}

/// Samples together with the amplitudes and noise that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Synthesis {
    /// `y(t_k)` for each realization (n×R).
    pub samples: CMat,
    /// Amplitudes of the active tones (s×R).
    pub amplitudes: CMat,
    pub noise: CMat,
}

fn complex_gaussian<R: rand::Rng>(r: &mut R, variance: f64) -> C64 {
    let sd = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(r);
    let im: f64 = StandardNormal.sample(r);
    C64::new(re * sd, im * sd)
}

/// Draws `R` realizations of `y(t) = x(t) + e(t)` with white complex Gaussian noise of variance `σ²`.
pub fn synthesize(model: &SignalModel, noise_variance: f64, seed: u64) -> Result<Synthesis> {
    if !(noise_variance >= 0.0) {
        return Err(invalid("noise variance must be nonnegative"));
    }
    let n = model.times.len();
    let s = model.support.len();
    let r = model.realizations;
    let mut ga = rng(derive_label(seed, "amplitudes"));
    let mut ge = rng(derive_label(seed, "noise"));
    let amplitudes = CMat::from_fn(s, r, |j, _| complex_gaussian(&mut ga, model.variances[j]));
    let noise = CMat::from_fn(n, r, |_, _| {
        if noise_variance == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            complex_gaussian(&mut ge, noise_variance)
        }
    });
    let tones = crate::linalg::select_columns(&model.tone_matrix(), &model.support);
    let samples = crate::linalg::matmul(&tones, &amplitudes) + &noise;
    Ok(Synthesis { samples, amplitudes, noise })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovarianceMode {
    Exact,
    Empirical(usize),
}

/// Covariances of the data, the object vector and the noise.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceTriple {
    pub r_y: CMat,
    pub r_z: CMat,
    pub r_e: CMat,
    pub mode: CovarianceMode,
}

impl CovarianceTriple {
    /// `R_Y − R_E`.
    pub fn signal(&self) -> CMat {
        &self.r_y - &self.r_e
    }
}

/// Analytic covariances for independent amplitudes: `R_Y = T diag(E|a|²) Tᴴ + σ² I`.
pub fn exact_covariances(model: &SignalModel, noise_variance: f64) -> CovarianceTriple {
    let t = model.tone_matrix();
    let n = t.nrows();
    let mut r_z = CMat::zeros(model.tones, model.tones);
    for (&j, &v) in model.support.iter().zip(&model.variances) {
        r_z[(j, j)] = C64::new(v, 0.0);
    }
    covariance_from_columns(&t, &r_z, noise_variance, n)
}

fn covariance_from_columns(steer: &CMat, r_z: &CMat, noise_variance: f64, n: usize) -> CovarianceTriple {
    let active: Vec<usize> = (0..r_z.nrows()).filter(|&j| r_z[(j, j)].norm() > 0.0).collect();
    let cols = crate::linalg::select_columns(steer, &active);
    let sub = CMat::from_fn(active.len(), active.len(), |i, j| r_z[(active[i], active[j])]);
    let r_y = mul_adjoint(&crate::linalg::matmul(&cols, &sub), &cols);
    let r_e = CMat::identity(n, n) * C64::new(noise_variance, 0.0);
    CovarianceTriple { r_y: r_y + &r_e, r_z: r_z.clone(), r_e, mode: CovarianceMode::Exact }
}

/// Sample covariances over the realizations; `R_E = σ²I` is taken as known.
pub fn empirical_covariances(model: &SignalModel, syn: &Synthesis, noise_variance: f64) -> CovarianceTriple {
    let r = syn.samples.ncols() as f64;
    let n = syn.samples.nrows();
    let r_y = mul_adjoint(&syn.samples, &syn.samples) / C64::new(r, 0.0);
    let za = mul_adjoint(&syn.amplitudes, &syn.amplitudes) / C64::new(r, 0.0);
    let mut r_z = CMat::zeros(model.tones, model.tones);
    for (a, &i) in model.support.iter().enumerate() {
        for (b, &j) in model.support.iter().enumerate() {
            r_z[(i, j)] = za[(a, b)];
        }
    }
    CovarianceTriple {
        r_y,
        r_z,
        r_e: CMat::identity(n, n) * C64::new(noise_variance, 0.0),
        mode: CovarianceMode::Empirical(syn.samples.ncols()),
    }
}

/// Identified grid indices with their imaging values.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceEstimate {
    pub indices: Vec<usize>,
    /// `J` at every candidate.
    pub values: Vec<f64>,
    /// `σ_s / σ_1` of `R_Y − R_E`.
    pub relative_gap: f64,
}

/// MUSIC on `R_Y − R_E` with fixed rank `s`, returning the `s` largest peaks.
pub fn covariance_music(triple: &CovarianceTriple, steering: &CMat, s: usize) -> Result<CovarianceEstimate> {
    let b = triple.signal();
    if b.nrows() != steering.nrows() {
        return Err(Error::DimensionMismatch("covariance and steering matrix differ in size".into()));
    }
    let dec = decompose(&b, RankRule::Fixed(s))?;
    let sv = &dec.singular_values;
    let relative_gap = if s == 0 { 1.0 } else { sv[s - 1] / sv[0] };
    if s > 0 && relative_gap < 1e-10 {
        let found = sv.iter().filter(|&&v| v > 1e-10 * sv[0]).count();
        return Err(Error::RankCollapse { expected: s, found });
    }
    let img = top_peaks(&imaging_on(&dec, steering)?, s);
    Ok(CovarianceEstimate { indices: img.recovered_support, values: img.values, relative_gap })
}

/// Identified frequencies (as zero-based tone indices).
pub fn identify_frequencies(model: &SignalModel, triple: &CovarianceTriple) -> Result<CovarianceEstimate> {
    covariance_music(triple, &model.steering(), model.support.len())
}

/// Exact covariances of uncorrelated point sources seen through `pair`; sources
/// sharing a grid cell add up and lower the rank.
pub fn source_covariances(pair: &SensingPair, sources: &[usize], variances: &[f64], noise_variance: f64) -> Result<CovarianceTriple> {
    if sources.len() != variances.len() {
        return Err(Error::DimensionMismatch("one variance per source is required".into()));
    }
    let n_points = pair.n_points();
    let mut r_z = CMat::zeros(n_points, n_points);
    for (&j, &v) in sources.iter().zip(variances) {
        if j >= n_points {
            return Err(invalid(format!("source index {j} outside the grid")));
        }
        r_z[(j, j)] += C64::new(v, 0.0);
    }
    Ok(covariance_from_columns(&pair.phi_ext, &r_z, noise_variance, pair.n()))
}

/// Localized sources.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceEstimate {
    pub indices: Vec<usize>,
    pub positions: Vec<[f64; 3]>,
    /// `J` at the returned positions.
    pub peak_values: Vec<f64>,
}

/// Covariance MUSIC over a planar grid with the sensing matrix of `pair`.
pub fn localize_sources(pair: &SensingPair, grid: &Grid, triple: &CovarianceTriple, s: usize) -> Result<SourceEstimate> {
    if grid.len() != pair.n_points() {
        return Err(Error::DimensionMismatch("grid does not match the sensing matrix".into()));
    }
    let est = covariance_music(triple, &pair.phi_ext, s)?;
    Ok(SourceEstimate {
        positions: est.indices.iter().map(|&j| grid.points[j]).collect(),
        peak_values: est.indices.iter().map(|&j| est.values[j]).collect(),
        indices: est.indices,
    })
}
