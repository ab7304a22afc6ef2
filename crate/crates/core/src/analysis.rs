//! Compressed-sensing and perturbation quantities: coherence, restricted isometry
//! constants, Γ_S, noise margins and their bounds.

use crate::error::{invalid, Error, Result};
use crate::forward::SensingPair;
use crate::linalg::{adjoint_mul, left_singular_system, mul_adjoint, orthonormal_basis, select_columns, spectral_norm, CMat, C64};
use crate::rng::rng;
use crate::scene::Grid;
use itertools::Itertools;
use serde::{Deserialize, Serialize};

/// Default cap on the number of subsets enumerated by [`ric_bruteforce`].
pub const RIC_ENUMERATION_CAP: u128 = 2_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub mu: f64,
    /// Columns attaining the maximum (i < j); absent for a single column.
    pub pair: Option<(usize, usize)>,
}

/// Largest cosine between distinct columns.
pub fn mutual_coherence(m: &CMat) -> Result<CoherenceReport> {
    let norms: Vec<f64> = m.column_iter().map(|c| c.norm()).collect();
    if let Some(j) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroColumn(j));
    }
    let gram = adjoint_mul(m, m);
    let mut best = CoherenceReport { mu: 0.0, pair: None };
    for j in 0..m.ncols() {
        for i in 0..j {
            let c = gram[(i, j)].norm() / (norms[i] * norms[j]);
            if best.pair.is_none() || c > best.mu {
                best = CoherenceReport { mu: c, pair: Some((i, j)) };
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RicMethod {
    Bruteforce,
    CoherenceBound,
    SetRestricted(Vec<usize>),
}

/// Lower and upper restricted isometry constants of a given order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RicEstimate {
    pub order: usize,
    pub delta_minus: f64,
    pub delta_plus: f64,
    pub method: RicMethod,
    /// Subset attaining δ⁻.
    pub witness_minus: Vec<usize>,
    /// Subset attaining δ⁺.
    pub witness_plus: Vec<usize>,
}

impl RicEstimate {
    /// Componentwise maximum, for constants that must hold for two matrices at once.
    pub fn max(&self, other: &RicEstimate) -> RicEstimate {
        let mut out = self.clone();
        if other.delta_minus > out.delta_minus {
            out.delta_minus = other.delta_minus;
            out.witness_minus = other.witness_minus.clone();
        }
        if other.delta_plus > out.delta_plus {
            out.delta_plus = other.delta_plus;
            out.witness_plus = other.witness_plus.clone();
        }
        out
    }
}

fn extreme_eigenvalues(gram: &CMat, subset: &[usize]) -> (f64, f64) {
    let r = subset.len();
    let sub = CMat::from_fn(r, r, |i, j| gram[(subset[i], subset[j])]);
    let ev = crate::linalg::hermitian_eigenvalues(&sub);
    (ev[0], ev[r - 1])
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Exact constants of order `r` by enumerating all column subsets.
pub fn ric_bruteforce(m: &CMat, r: usize) -> Result<RicEstimate> {
    ric_bruteforce_capped(m, r, RIC_ENUMERATION_CAP)
}

/// [`ric_bruteforce`] with an explicit enumeration cap.
pub fn ric_bruteforce_capped(m: &CMat, r: usize, cap: u128) -> Result<RicEstimate> {
    let n_cols = m.ncols();
    if r == 0 || r > n_cols {
        return Err(invalid(format!("order {r} must lie in 1..={n_cols}")));
    }
    let count = binomial(n_cols, r);
    if count > cap {
        return Err(Error::EnumerationCap { count, cap });
    }
    let gram = adjoint_mul(m, m);
    let mut est = RicEstimate {
        order: r,
        delta_minus: 0.0,
        delta_plus: 0.0,
        method: RicMethod::Bruteforce,
        witness_minus: (0..r).collect(),
        witness_plus: (0..r).collect(),
    };
    for subset in (0..n_cols).combinations(r) {
        let (lo, hi) = extreme_eigenvalues(&gram, &subset);
        if 1.0 - lo > est.delta_minus {
            est.delta_minus = 1.0 - lo;
            est.witness_minus = subset.clone();
        }
        if hi - 1.0 > est.delta_plus {
            est.delta_plus = hi - 1.0;
            est.witness_plus = subset;
        }
    }
    est.delta_minus = est.delta_minus.min(1.0);
    Ok(est)
}

/// Constants restricted to one column set.
pub fn ric_set(m: &CMat, set: &[usize]) -> Result<RicEstimate> {
    if set.is_empty() {
        return Err(invalid("restricted isometry constants need a nonempty set"));
    }
    if let Some(&j) = set.iter().find(|&&j| j >= m.ncols()) {
        return Err(Error::DimensionMismatch(format!("column {j} outside matrix")));
    }
    let sub = select_columns(m, set);
    let gram = adjoint_mul(&sub, &sub);
    let idx: Vec<usize> = (0..set.len()).collect();
    let (lo, hi) = extreme_eigenvalues(&gram, &idx);
    Ok(RicEstimate {
        order: set.len(),
        delta_minus: (1.0 - lo).clamp(0.0, 1.0),
        delta_plus: (hi - 1.0).max(0.0),
        method: RicMethod::SetRestricted(set.to_vec()),
        witness_minus: set.to_vec(),
        witness_plus: set.to_vec(),
    })
}

/// Set-restricted constants on `count` uniformly random `r`-subsets.
pub fn ric_sampled(m: &CMat, r: usize, count: usize, seed: u64) -> Result<Vec<RicEstimate>> {
    if r == 0 || r > m.ncols() {
        return Err(invalid(format!("order {r} must lie in 1..={}", m.ncols())));
    }
    let mut g = rng(seed);
    (0..count)
        .map(|_| {
            let mut set = rand::seq::index::sample(&mut g, m.ncols(), r).into_vec();
            set.sort_unstable();
            ric_set(m, &set)
        })
        .collect()
}

/// `δ±_r ≤ μ(r − 1)`.
pub fn ric_coherence_bound(report: &CoherenceReport, r: usize) -> RicEstimate {
    let d = report.mu * r.saturating_sub(1) as f64;
    RicEstimate {
        order: r,
        delta_minus: d,
        delta_plus: d,
        method: RicMethod::CoherenceBound,
        witness_minus: Vec::new(),
        witness_plus: Vec::new(),
    }
}

/// `Γ_S` together with the off-support point attaining it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub gamma: f64,
    pub argmin: Option<usize>,
    /// Condition number of `Φ_S`.
    pub condition: f64,
}

/// `Γ_S = min_{r ∉ S(ℓ)} ‖(I − ΦΦ†)φ_r‖/‖φ_r‖`, with `S(ℓ)` the grid points within
/// `ℓ` of the support when a neighborhood is given.
pub fn gamma_exact(pair: &SensingPair, support: &[usize], neighborhood: Option<(&Grid, f64)>) -> Result<GammaReport> {
    let excluded: Vec<usize> = match neighborhood {
        Some((grid, radius)) => {
            if grid.len() != pair.n_points() {
                return Err(Error::DimensionMismatch("grid does not match the sensing matrix".into()));
            }
            crate::music::neighborhood(grid, support, radius)
        }
        None => {
            let mut s = support.to_vec();
            s.sort_unstable();
            s
        }
    };
    gamma_exact_matrix(&pair.phi_ext, support, &excluded)
}

/// [`gamma_exact`] on an explicit matrix, excluding the sorted index set `excluded`.
pub fn gamma_exact_matrix(phi_ext: &CMat, support: &[usize], excluded: &[usize]) -> Result<GammaReport> {
    let phi = select_columns(phi_ext, support);
    let (q, condition) = orthonormal_basis(&phi);
    if condition > 1e12 {
        return Err(Error::IllConditioned { condition });
    }
    let rest: Vec<usize> = (0..phi_ext.ncols()).filter(|j| excluded.binary_search(j).is_err()).collect();
    if rest.is_empty() {
        return Ok(GammaReport { gamma: 1.0, argmin: None, condition });
    }
    let cols = select_columns(phi_ext, &rest);
    let coef = adjoint_mul(&q, &cols);
    let resid = &cols - crate::linalg::matmul(&q, &coef);
    let mut best = (f64::INFINITY, 0);
    for (k, (c, r)) in cols.column_iter().zip(resid.column_iter()).enumerate() {
        let v = r.norm() / c.norm();
        if v < best.0 {
            best = (v, rest[k]);
        }
    }
    Ok(GammaReport { gamma: best.0.min(1.0), argmin: Some(best.1), condition })
}

fn quotient(dm: f64, dp: f64) -> f64 {
    dm * (1.0 + dp) / (2.0 + dp - dm)
}

/// RIC lower bound `1 − δ⁻_{s+1}(1+δ⁺_s)/(2+δ⁺_s−δ⁻_{s+1})` for `Γ_S`.
pub fn gamma_lower_bound(ric_s: &RicEstimate, ric_s1: &RicEstimate) -> Result<f64> {
    gamma_lower_bound_values(ric_s1.delta_minus, ric_s.delta_plus)
}

/// [`gamma_lower_bound`] from raw constants.
pub fn gamma_lower_bound_values(delta_minus_s1: f64, delta_plus_s: f64) -> Result<f64> {
    if delta_minus_s1 >= 1.0 {
        return Err(Error::VacuousBound(format!("δ⁻ = {delta_minus_s1} ≥ 1")));
    }
    Ok(1.0 - quotient(delta_minus_s1, delta_plus_s))
}

/// Set-restricted bound: `δ⁺_S` and the largest `δ⁻_{S∪{r}}` over `r ∉ S`.
pub fn gamma_lower_bound_set(m: &CMat, support: &[usize]) -> Result<f64> {
    let dp = ric_set(m, support)?.delta_plus;
    let mut dm: f64 = 0.0;
    let mut ext = support.to_vec();
    ext.push(0);
    for r in 0..m.ncols() {
        if support.contains(&r) {
            continue;
        }
        *ext.last_mut().unwrap() = r;
        dm = dm.max(ric_set(m, &ext)?.delta_minus);
    }
    gamma_lower_bound_values(dm, dp)
}

/// Noise margin `Δ = 1/2 − 1/(2√(√2 Γ + 1))`.
pub fn delta_margin(gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid(format!("Γ must lie in [0, 1], got {gamma}")));
    }
    Ok(0.5 - 0.5 / (std::f64::consts::SQRT_2 * gamma + 1.0).sqrt())
}

/// `p(ρ) = 1 − 8ρ + 20ρ² − 20ρ³`.
pub fn rho_polynomial(rho: f64) -> f64 {
    1.0 - 8.0 * rho + 20.0 * rho * rho - 20.0 * rho * rho * rho
}

/// The real root of [`rho_polynomial`], by bisection on `[1/5, 1/4]`.
pub fn rho_star() -> f64 {
    let (mut lo, mut hi) = (0.2, 0.25);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if rho_polynomial(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Which factorization of the object enters a bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundCase {
    /// General object matrix `Z`, through its singular values `ζ`.
    General { zeta: f64, delta: f64 },
    /// Scattering objects `Z = XΨ*`, through amplitudes `ξ`.
    Scattering { xi: f64, delta: f64 },
}

/// Upper bound on `‖ℰ‖₂`: `ε² + 2ζ_max√(1+δ⁺)ε` or `ε² + 2ξ_max(1+δ⁺)ε`.
pub fn error_term_bound(epsilon: f64, case: BoundCase) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(invalid("ε must be nonnegative"));
    }
    Ok(match case {
        BoundCase::General { zeta, delta } => epsilon * epsilon + 2.0 * zeta * (1.0 + delta).sqrt() * epsilon,
        BoundCase::Scattering { xi, delta } => epsilon * epsilon + 2.0 * xi * (1.0 + delta) * epsilon,
    })
}

/// Lower bound on `σ_min(YY*)`: `(1−δ⁻)ζ²_min` or `(1−δ⁻)²ξ²_min`.
pub fn sigma_min_bound(case: BoundCase) -> Result<f64> {
    let (d, v) = match case {
        BoundCase::General { zeta, delta } => (delta, zeta),
        BoundCase::Scattering { xi, delta } => (delta, xi),
    };
    if d >= 1.0 {
        return Err(Error::VacuousBound(format!("δ⁻ = {d} ≥ 1")));
    }
    Ok(match case {
        BoundCase::General { .. } => (1.0 - d) * v * v,
        BoundCase::Scattering { .. } => (1.0 - d).powi(2) * v * v,
    })
}

/// Extreme singular values `(ζ_min, ζ_max)` of `Z = XΨ*`.
pub fn zeta_extremes(amplitudes: &[C64], psi: &CMat) -> (f64, f64) {
    let s = amplitudes.len();
    if s == 0 {
        return (0.0, 0.0);
    }
    let z = CMat::from_fn(s, psi.nrows(), |j, l| amplitudes[j] * psi[(l, j)].conj());
    let sv = crate::linalg::singular_values(&z);
    let min = if psi.nrows() >= s { *sv.last().unwrap() } else { 0.0 };
    (min, sv[0])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NsrCase {
    /// Noise-to-object ratio `ε/ζ_min`.
    Nor,
    /// Noise-to-scatterer ratio `ε/ξ_min` with RIC-dependent coefficients.
    Nsr,
    /// Noise-to-scatterer ratio when all constants are at most 1/2.
    HalfRic,
}

/// Quantities entering the admissible-noise bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NsrInputs {
    pub epsilon: f64,
    pub delta_plus_s: f64,
    pub delta_minus_s: f64,
    /// Noise margin `Δ`.
    pub margin: f64,
    pub xi_min: f64,
    pub xi_max: f64,
    pub zeta_min: f64,
    pub zeta_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NsrCheck {
    pub bound: f64,
    pub measured: f64,
    pub satisfied: bool,
}

/// Evaluates the closed-form bound on the admissible noise ratio.
pub fn nsr_admissible(inp: &NsrInputs, case: NsrCase) -> NsrCheck {
    let (bound, measured) = match case {
        NsrCase::Nor => {
            let k = inp.zeta_max / inp.zeta_min;
            let dp = inp.delta_plus_s;
            let b = ((1.0 + dp) * k * k + (1.0 - inp.delta_minus_s) * inp.margin).sqrt() - k * (1.0 + dp).sqrt();
            (b, inp.epsilon / inp.zeta_min)
        }
        NsrCase::Nsr => {
            let k = inp.xi_max / inp.xi_min;
            let a = (1.0 + inp.delta_plus_s) * k;
            let b = (a * a + (1.0 - inp.delta_minus_s).powi(2) * inp.margin).sqrt() - a;
            (b, inp.epsilon / inp.xi_min)
        }
        NsrCase::HalfRic => {
            let k = inp.xi_max / inp.xi_min;
            let b = (2.25 * k * k + inp.margin / 4.0).sqrt() - 1.5 * k;
            (b, inp.epsilon / inp.xi_min)
        }
    };
    let bound = bound.max(0.0);
    NsrCheck { bound, measured, satisfied: measured < bound }
}

/// Leading-order form `(1−δ⁻)²Δ / (2(1+δ⁺)ξ_max/ξ_min)` of the NSR bound as `δ⁻ → 1`.
pub fn superresolution_proxy(delta_minus_s: f64, delta_plus_s: f64, margin: f64, dynamic_range: f64) -> f64 {
    (1.0 - delta_minus_s).powi(2) * margin / (2.0 * (1.0 + delta_plus_s) * dynamic_range)
}

/// Measured perturbation of the signal/noise splitting and its bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub e11: f64,
    pub e12: f64,
    pub e21: f64,
    pub e22: f64,
    /// `‖ℰ‖₂`.
    pub e_norm: f64,
    /// `σ_s(Y)²`.
    pub sigma_min: f64,
    /// `‖ℰ‖₂ / σ_min`.
    pub rho: f64,
    pub condition_205: bool,
    pub rho_below_star: bool,
    pub f_norm: f64,
    pub f_bound: f64,
    /// Sine of the largest principal angle between the noise subspaces.
    pub subspace_distance: f64,
    /// `‖Q₂^ε − Q₂‖₂` in the basis aligned through `F`.
    pub aligned_distance: f64,
    /// `2ρ(1−ρ)/(1−2ρ)²`.
    pub distance_bound: f64,
    /// `σ_s(Y^ε) > σ_{s+1}(Y^ε)`.
    pub separated: bool,
    pub bounds_applicable: bool,
    pub bounds_hold: bool,
}

fn inverse_sqrt_hermitian(h: &CMat) -> CMat {
    let (ev, u) = crate::linalg::hermitian_eigen(h);
    let d = crate::linalg::CVec::from_iterator(ev.len(), ev.iter().map(|v| C64::new(1.0 / v.sqrt(), 0.0)));
    &u * CMat::from_diagonal(&d) * u.adjoint()
}

/// Compares the noise subspace of `Y + E` with that of `Y` (rank `s`).
pub fn perturbation_check(y: &CMat, e: &CMat, s: usize) -> Result<PerturbationReport> {
    let (n, m) = y.shape();
    if e.shape() != (n, m) {
        return Err(Error::DimensionMismatch("perturbation does not match the data".into()));
    }
    if s == 0 || s >= n || s > m {
        return Err(invalid(format!("rank {s} must satisfy 1 ≤ s < n and s ≤ m")));
    }
    let (u, sv) = left_singular_system(y);
    let q1 = u.columns(0, s).into_owned();
    let q2 = u.columns(s, n - s).into_owned();
    let ye = y + e;
    let cal_e = mul_adjoint(e, y) + mul_adjoint(y, e) + mul_adjoint(e, e);
    let block = |a: &CMat, b: &CMat| spectral_norm(&adjoint_mul(a, &crate::linalg::matmul(&cal_e, b)));
    let (e11, e12, e21, e22) = (block(&q1, &q1), block(&q1, &q2), block(&q2, &q1), block(&q2, &q2));
    let e_norm = spectral_norm(&cal_e);
    let sigma_min = sv[s - 1] * sv[s - 1];
    let rho = e_norm / sigma_min;
    let denom = sigma_min - e11 - e22;
    let condition_205 = denom > 0.0 && (e12 * e21).sqrt() / denom < 0.5;
    let rho_below_star = rho < rho_star();
    let f_bound = if denom > 0.0 { 2.0 * e21 / denom } else { f64::INFINITY };

    let (ue, sve) = left_singular_system(&ye);
    let q1e = ue.columns(0, s).into_owned();
    let q2e = ue.columns(s, n - s).into_owned();
    let a = adjoint_mul(&q1, &q1e);
    let b = adjoint_mul(&q2, &q1e);
    let f = match a.clone().try_inverse() {
        Some(ainv) => b * ainv,
        None => CMat::from_element(n - s, s, C64::new(f64::INFINITY, 0.0)),
    };
    let f_norm = spectral_norm(&f);
    let aligned_distance = if f_norm.is_finite() {
        let ffh = mul_adjoint(&f, &f) + CMat::identity(n - s, n - s);
        let q2a = (&q2 - crate::linalg::mul_adjoint(&q1, &f)) * inverse_sqrt_hermitian(&ffh);
        spectral_norm(&(q2a - &q2))
    } else {
        f64::INFINITY
    };
    let subspace_distance = spectral_norm(&adjoint_mul(&q1, &q2e)).min(1.0);
    let distance_bound = 2.0 * rho * (1.0 - rho) / (1.0 - 2.0 * rho).powi(2);
    let separated = sve.get(s).is_none_or(|&next| sve[s - 1] > next);
    let bounds_applicable = condition_205 && rho_below_star;
    let tol = 1e-9;
    let bounds_hold = !bounds_applicable
        || (f_norm <= f_bound * (1.0 + tol) + tol
            && subspace_distance <= distance_bound * (1.0 + tol) + tol
            && aligned_distance <= distance_bound * (1.0 + tol) + tol);
    Ok(PerturbationReport {
        e11,
        e12,
        e21,
        e22,
        e_norm,
        sigma_min,
        rho,
        condition_205,
        rho_below_star,
        f_norm,
        f_bound,
        subspace_distance,
        aligned_distance,
        distance_bound,
        separated,
        bounds_applicable,
        bounds_hold,
    })
}

/// One labeled bound/measurement pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub satisfied: bool,
}

impl BoundEntry {
    /// Entry requiring `measured ≤ bound`.
    pub fn upper(name: &str, measured: f64, bound: f64) -> Self {
        BoundEntry { name: name.into(), measured, bound, satisfied: measured <= bound }
    }

    /// Entry requiring `measured ≥ bound`.
    pub fn lower(name: &str, measured: f64, bound: f64) -> Self {
        BoundEntry { name: name.into(), measured, bound, satisfied: measured >= bound }
    }
}

/// Gathered stability quantities for one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityBudget {
    pub gamma: f64,
    pub gamma_ell: Option<f64>,
    pub gamma_lower_bound: Option<f64>,
    pub delta_margin: f64,
    pub delta_margin_ell: Option<f64>,
    pub rho: f64,
    pub rho_star: f64,
    pub epsilon: f64,
    pub e_norm: f64,
    pub e_norm_bound: f64,
    pub sigma_min: f64,
    pub sigma_min_bound: Option<f64>,
    pub zeta_min: f64,
    pub zeta_max: f64,
    pub xi_min: f64,
    pub xi_max: f64,
    pub dynamic_range: f64,
    pub delta_plus_s: f64,
    pub delta_minus_s: f64,
    pub delta_minus_s1: f64,
    pub nsr: NsrCheck,
    pub nor: NsrCheck,
    pub threshold_gamma: f64,
    pub threshold_ric: Option<f64>,
}

impl StabilityBudget {
    /// Labeled entries for export.
    pub fn entries(&self) -> Vec<BoundEntry> {
        let mut out = Vec::new();
        if let Some(l) = self.gamma_lower_bound {
            out.push(BoundEntry::lower("gamma_vs_ric_lower_bound", self.gamma, l));
        }
        out.push(BoundEntry::upper("error_term_norm", self.e_norm, self.e_norm_bound));
        if let Some(b) = self.sigma_min_bound {
            out.push(BoundEntry::lower("sigma_min", self.sigma_min, b));
        }
        out.push(BoundEntry { satisfied: self.rho < self.delta_margin, ..BoundEntry::upper("rho_vs_margin", self.rho, self.delta_margin) });
        out.push(BoundEntry { satisfied: self.rho < self.rho_star, ..BoundEntry::upper("rho_vs_rho_star", self.rho, self.rho_star) });
        out.push(BoundEntry {
            name: "noise_to_scatterer_ratio".into(),
            measured: self.nsr.measured,
            bound: self.nsr.bound,
            satisfied: self.nsr.satisfied,
        });
        out.push(BoundEntry {
            name: "noise_to_object_ratio".into(),
            measured: self.nor.measured,
            bound: self.nor.bound,
            satisfied: self.nor.satisfied,
        });
        out
    }
}

/// Budget report as exported JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub budget: StabilityBudget,
    pub entries: Vec<BoundEntry>,
}

impl BudgetReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Assembles the stability budget of a scattering instance. RIC values are the
/// set-restricted constants on `S` and `S ∪ {r}` over both `Φ̃` and `Ψ̃` unless
/// `ric` supplies constants `(δ_s, δ_{s+1})` computed elsewhere.
pub fn stability_budget(
    pair: &SensingPair,
    amplitudes: &[C64],
    y_clean: &CMat,
    noise: Option<&CMat>,
    ric: Option<(&RicEstimate, &RicEstimate)>,
    neighborhood: Option<(&Grid, f64)>,
) -> Result<StabilityBudget> {
    let support = pair.support.clone();
    let s = support.len();
    if s == 0 || s != amplitudes.len() {
        return Err(invalid("budget needs a nonempty support matching the amplitudes"));
    }
    let g = gamma_exact(pair, &support, None)?;
    let gamma_ell = match neighborhood {
        Some(nb) => Some(gamma_exact(pair, &support, Some(nb))?.gamma),
        None => None,
    };
    let (dp, dm, dm1) = match ric {
        Some((rs, rs1)) => (rs.delta_plus, rs.delta_minus, rs1.delta_minus),
        None => {
            let rs = ric_set(&pair.phi_ext, &support)?.max(&ric_set(&pair.psi_ext, &support)?);
            let mut dm1: f64 = 0.0;
            let mut ext = support.clone();
            ext.push(0);
            for r in (0..pair.n_points()).filter(|r| !support.contains(r)) {
                *ext.last_mut().unwrap() = r;
                dm1 = dm1.max(ric_set(&pair.phi_ext, &ext)?.delta_minus);
            }
            (rs.delta_plus, rs.delta_minus, dm1)
        }
    };
    let gamma_lower_bound = gamma_lower_bound_values(dm1, dp).ok();
    let margin = delta_margin(g.gamma)?;
    let (e_norm, epsilon) = match noise {
        Some(e) => {
            let cal_e = mul_adjoint(e, y_clean) + mul_adjoint(y_clean, e) + mul_adjoint(e, e);
            (spectral_norm(&cal_e), spectral_norm(e))
        }
        None => (0.0, 0.0),
    };
    let sv = crate::linalg::singular_values(y_clean);
    let sigma_min = sv.get(s - 1).map_or(0.0, |v| v * v);
    let xi_min = amplitudes.iter().map(|a| a.norm()).fold(f64::INFINITY, f64::min);
    let xi_max = amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let (zeta_min, zeta_max) = zeta_extremes(amplitudes, &pair.psi);
    let inputs = NsrInputs { epsilon, delta_plus_s: dp, delta_minus_s: dm, margin, xi_min, xi_max, zeta_min, zeta_max };
    Ok(StabilityBudget {
        gamma: g.gamma,
        gamma_ell,
        gamma_lower_bound,
        delta_margin: margin,
        delta_margin_ell: gamma_ell.map(delta_margin).transpose()?,
        rho: if sigma_min > 0.0 { e_norm / sigma_min } else { f64::INFINITY },
        rho_star: rho_star(),
        epsilon,
        e_norm,
        e_norm_bound: error_term_bound(epsilon, BoundCase::Scattering { xi: xi_max, delta: dp })?,
        sigma_min,
        sigma_min_bound: sigma_min_bound(BoundCase::Scattering { xi: xi_min, delta: dm }).ok(),
        zeta_min,
        zeta_max,
        xi_min,
        xi_max,
        dynamic_range: xi_max / xi_min,
        delta_plus_s: dp,
        delta_minus_s: dm,
        delta_minus_s1: dm1,
        nsr: nsr_admissible(&inputs, NsrCase::Nsr),
        nor: nsr_admissible(&inputs, NsrCase::Nor),
        threshold_gamma: if g.gamma > 0.0 { 2.0 / (g.gamma * g.gamma) } else { f64::INFINITY },
        threshold_ric: gamma_lower_bound.filter(|l| *l > 0.0).map(|l| 2.0 / (l * l)),
    })
}

/// Empirical `q`-quantile (linear interpolation between order statistics).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}
