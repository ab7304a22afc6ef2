//! MUSIC: noise-subspace projection of steering vectors and support recovery.

use crate::error::{invalid, Error, Result};
use crate::forward::SensingPair;
use crate::linalg::{adjoint_mul, left_singular_system, CMat, C64};
use crate::scene::{distance, Grid, Scene};
use serde::{Deserialize, Serialize};

/// Cap applied to the imaging function at numerical singularities.
pub const J_CAP: f64 = 1e14;
/// Squared projector norms below this value are treated as singular.
pub const PROJECTOR_FLOOR: f64 = 1e-14;
/// Default ratio for the gap rank rule.
pub const DEFAULT_GAP: f64 = 1e3;

/// How the signal-subspace dimension is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankRule {
    /// Known sparsity.
    Fixed(usize),
    /// Largest consecutive singular-value ratio, which must exceed the tolerance.
    Gap(f64),
}

/// Singular system of the data split into signal and noise subspaces.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    /// `σ₁ ≥ … ≥ σ_{min(n,m)}`.
    pub singular_values: Vec<f64>,
    /// `Q₁` (n×ŝ).
    pub signal_basis: CMat,
    /// `Q₂` (n×(n−ŝ)).
    pub noise_basis: CMat,
    pub rank_estimate: usize,
    /// `σ_ŝ / σ_{ŝ+1}` (infinite when the next value is zero or absent).
    pub gap: f64,
}

fn gap_at(sv: &[f64], k: usize) -> f64 {
    if k == 0 {
        return f64::INFINITY;
    }
    match sv.get(k) {
        Some(&next) if next > 0.0 => sv[k - 1] / next,
        _ => f64::INFINITY,
    }
}

/// Full SVD of `Y` with the rank chosen by `rule`.
pub fn decompose(y: &CMat, rule: RankRule) -> Result<SpectralDecomposition> {
    let (n, m) = y.shape();
    if n == 0 || m == 0 || y.iter().all(|z| z.norm() == 0.0) {
        return Err(invalid("data matrix is zero"));
    }
    let (u, sv) = left_singular_system(y);
    let r = sv.len();
    let rank = match rule {
        RankRule::Fixed(s) => {
            if s > r {
                return Err(invalid(format!("fixed rank {s} exceeds min(n, m) = {r}")));
            }
            s
        }
        RankRule::Gap(tol) => {
            // Values at round-off level count as zero so that exact rank shows as an infinite gap.
            let floor = sv[0] * 1e-13;
            let mut best: Option<(usize, f64)> = None;
            for k in 1..r {
                let ratio = if sv[k] <= floor { f64::INFINITY } else { sv[k - 1] / sv[k] };
                if best.is_none_or(|(_, b)| ratio > b) {
                    best = Some((k, ratio));
                }
                if ratio.is_infinite() {
                    break;
                }
            }
            match best {
                Some((k, ratio)) if ratio > tol => k,
                _ => return Err(Error::AmbiguousRank { tol, spectrum: sv.clone() }),
            }
        }
    };
    Ok(SpectralDecomposition {
        gap: gap_at(&sv, rank),
        signal_basis: u.columns(0, rank).into_owned(),
        noise_basis: u.columns(rank, n - rank).into_owned(),
        singular_values: sv,
        rank_estimate: rank,
    })
}

/// Support-selection rule attached to an imaging result.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportRule {
    Unassigned,
    TopPeaks(usize),
    Threshold(f64),
}

/// Imaging function over all grid points.
#[derive(Clone, Debug, PartialEq)]
pub struct ImagingResult {
    /// `J^ε(r)`, capped at [`J_CAP`].
    pub values: Vec<f64>,
    /// Points where the projector norm fell below the singularity floor.
    pub capped: Vec<bool>,
    /// `‖P^ε φ_r‖₂` for unit `φ_r`.
    pub projector_norms: Vec<f64>,
    pub recovered_support: Vec<usize>,
    pub rule: SupportRule,
    pub threshold_value: Option<f64>,
    /// Whether the top-peak selection had to break an exact tie.
    pub tie_broken: bool,
}

/// Squared noise-subspace projections `Σ_{k>ŝ} |v_k* φ_r|²` of the unit steering vectors.
pub fn noise_projections(noise_basis: &CMat, steering: &CMat) -> Vec<f64> {
    let w = adjoint_mul(noise_basis, steering);
    steering
        .column_iter()
        .zip(w.column_iter())
        .map(|(phi, proj)| {
            let nrm2 = phi.norm_squared();
            if nrm2 == 0.0 {
                0.0
            } else {
                proj.norm_squared() / nrm2
            }
        })
        .collect()
}

/// Evaluates `J^ε(r) = ‖P^ε φ_r‖⁻²` on every column of `Φ̃`.
pub fn imaging_function(dec: &SpectralDecomposition, pair: &SensingPair) -> Result<ImagingResult> {
    imaging_on(dec, &pair.phi_ext)
}

/// [`imaging_function`] for an explicit steering matrix.
pub fn imaging_on(dec: &SpectralDecomposition, steering: &CMat) -> Result<ImagingResult> {
    if dec.noise_basis.ncols() == 0 {
        return Err(Error::EmptyNoiseSpace { rank: dec.rank_estimate });
    }
    if steering.nrows() != dec.noise_basis.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "steering vectors have {} entries, data has {} rows",
            steering.nrows(),
            dec.noise_basis.nrows()
        )));
    }
    let p2 = noise_projections(&dec.noise_basis, steering);
    let capped: Vec<bool> = p2.iter().map(|&v| v < PROJECTOR_FLOOR).collect();
    let values = p2.iter().zip(&capped).map(|(&v, &c)| if c { J_CAP } else { (1.0 / v).min(J_CAP) }).collect();
    Ok(ImagingResult {
        values,
        capped,
        projector_norms: p2.iter().map(|v| v.sqrt()).collect(),
        recovered_support: Vec::new(),
        rule: SupportRule::Unassigned,
        threshold_value: None,
        tie_broken: false,
    })
}

/// Selects the `s` largest values of `J^ε`, breaking ties by grid index.
pub fn top_peaks(img: &ImagingResult, s: usize) -> ImagingResult {
    let mut order: Vec<usize> = (0..img.values.len()).collect();
    // Rank by projector norm: identical to ranking J but unaffected by the cap.
    order.sort_by(|&a, &b| img.projector_norms[a].total_cmp(&img.projector_norms[b]).then(a.cmp(&b)));
    let s = s.min(order.len());
    let tie_broken = s > 0 && s < order.len() && img.projector_norms[order[s - 1]] == img.projector_norms[order[s]];
    let mut support = order[..s].to_vec();
    support.sort_unstable();
    ImagingResult { recovered_support: support, rule: SupportRule::TopPeaks(s), tie_broken, ..img.clone() }
}

/// Threshold rules for `J^ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdRule {
    /// `τ = 2 Γ_S⁻²`.
    Gamma(f64),
    /// `τ = 2 L⁻²` with `L = 1 − δ⁻_{s+1}(1+δ⁺_s)/(2+δ⁺_s−δ⁻_{s+1})`.
    Ric { delta_minus_s1: f64, delta_plus_s: f64 },
    /// `τ = 128/25`.
    Fixed,
}

impl ThresholdRule {
    pub fn tau(&self) -> Result<f64> {
        match *self {
            ThresholdRule::Gamma(g) => {
                if g <= 0.0 {
                    return Err(Error::InfiniteThreshold("Γ_S = 0".into()));
                }
                Ok(2.0 / (g * g))
            }
            ThresholdRule::Ric { delta_minus_s1: dm, delta_plus_s: dp } => {
                let l = 1.0 - dm * (1.0 + dp) / (2.0 + dp - dm);
                if !(l > 0.0) {
                    return Err(Error::InfiniteThreshold(format!("RIC lower bound for Γ_S is {l}")));
                }
                Ok(2.0 / (l * l))
            }
            ThresholdRule::Fixed => Ok(128.0 / 25.0),
        }
    }
}

/// `{r : J^ε(r) ≥ τ}`.
pub fn threshold_support(img: &ImagingResult, rule: ThresholdRule) -> Result<Vec<usize>> {
    let tau = rule.tau()?;
    Ok(img.values.iter().enumerate().filter(|(_, &v)| v >= tau).map(|(j, _)| j).collect())
}

/// Imaging result with the threshold rule applied.
pub fn with_threshold(img: &ImagingResult, rule: ThresholdRule) -> Result<ImagingResult> {
    let tau = rule.tau()?;
    let support = threshold_support(img, rule)?;
    Ok(ImagingResult {
        recovered_support: support,
        rule: SupportRule::Threshold(tau),
        threshold_value: Some(tau),
        tie_broken: false,
        ..img.clone()
    })
}

/// Outcome of comparing a gridless support estimate with ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridlessCertificate {
    /// `Θ ∩ S_ℓᶜ = ∅`.
    pub no_false_alarms: bool,
    /// `S ⊆ Θ`.
    pub contains_support: bool,
    /// Largest distance from a point of `Θ` to the nearest true scatterer.
    pub max_distance: f64,
}

/// Grid points within `radius` of any support point.
pub fn neighborhood(grid: &Grid, support: &[usize], radius: f64) -> Vec<usize> {
    (0..grid.len())
        .filter(|&j| support.iter().any(|&k| distance(&grid.points[j], &grid.points[k]) <= radius))
        .collect()
}

/// Thresholded support on a (possibly refined) grid; with ground truth, also
/// certifies that `Θ` lies within `radius` of the scatterers and contains them.
pub fn gridless_support(
    img: &ImagingResult,
    grid: &Grid,
    radius: f64,
    rule: ThresholdRule,
    truth: Option<&Scene>,
) -> Result<(Vec<usize>, Option<GridlessCertificate>)> {
    if img.values.len() != grid.len() {
        return Err(Error::DimensionMismatch("imaging result and grid differ in size".into()));
    }
    if !(radius >= 0.0) {
        return Err(invalid("neighborhood radius must be nonnegative"));
    }
    let theta = threshold_support(img, rule)?;
    let cert = truth.map(|scene| {
        let near = neighborhood(grid, &scene.support, radius);
        let max_distance = theta
            .iter()
            .map(|&j| {
                scene
                    .support
                    .iter()
                    .map(|&k| distance(&grid.points[j], &grid.points[k]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        GridlessCertificate {
            no_false_alarms: theta.iter().all(|j| near.binary_search(j).is_ok()),
            contains_support: scene.support.iter().all(|j| theta.binary_search(j).is_ok()),
            max_distance,
        }
    });
    Ok((theta, cert))
}

/// Least-squares amplitudes for `Y = Φ diag(ξ) Ψ*` on a given support.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeFit {
    pub amplitudes: Vec<C64>,
    /// `‖Y − Φ diag(ξ̂) Ψ*‖_F`.
    pub residual: f64,
    pub condition: f64,
}

/// Solves the overdetermined system for the diagonal object matrix.
pub fn invert_amplitudes(y: &CMat, phi: &CMat, psi: &CMat) -> Result<AmplitudeFit> {
    let (n, m) = y.shape();
    let s = phi.ncols();
    if phi.nrows() != n || psi.nrows() != m || psi.ncols() != s {
        return Err(Error::DimensionMismatch("restricted pair does not match the data".into()));
    }
    if s == 0 {
        return Ok(AmplitudeFit { amplitudes: Vec::new(), residual: y.norm(), condition: 1.0 });
    }
    // Column j of the system is vec(φ_j ψ_j*).
    let sys = CMat::from_fn(n * m, s, |idx, j| phi[(idx % n, j)] * psi[(idx / n, j)].conj());
    let rhs = CMat::from_column_slice(n * m, 1, y.as_slice());
    let svd = crate::linalg::Svd::new(&sys);
    let (smax, smin) = (svd.max(), svd.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > 1e12 {
        return Err(Error::IllConditioned { condition });
    }
    let x = svd.solve(&rhs, 0.0);
    let residual = (&rhs - &sys * &x).norm();
    Ok(AmplitudeFit { amplitudes: x.iter().cloned().collect(), residual, condition })
}
