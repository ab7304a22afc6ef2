//! Complex basis pursuit (denoising) by ADMM, orthogonal matching pursuit, and
//! the checkers for their recovery guarantees.

use crate::analysis::RicEstimate;
use crate::error::{invalid, Error, Result};
use crate::linalg::{adjoint_matvec, adjoint_mul, matvec, mul_adjoint, select_columns, CMat, CVec, SplitOperator, C64};
use serde::{Deserialize, Serialize};

/// `min ‖z‖₁` subject to `‖y − Φ̃z‖₂ ≤ ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseProblem {
    pub matrix: CMat,
    pub data: CVec,
    pub epsilon: f64,
}

impl SparseProblem {
    /// Validates shapes, `ε ≥ 0` and unit columns.
    pub fn new(matrix: CMat, data: CVec, epsilon: f64) -> Result<Self> {
        if matrix.nrows() != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} rows, data has {} entries",
                matrix.nrows(),
                data.len()
            )));
        }
        if !(epsilon >= 0.0) {
            return Err(invalid("ε must be nonnegative"));
        }
        if let Some(j) = matrix.column_iter().position(|c| (c.norm() - 1.0).abs() > 1e-8) {
            return Err(invalid(format!("column {j} does not have unit norm")));
        }
        Ok(SparseProblem { matrix, data, epsilon })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Solver output.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSolution {
    pub z_hat: CVec,
    /// `‖ẑ‖₁`.
    pub objective: f64,
    /// `‖y − Φ̃ẑ‖₂`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Entries above `1e−6·‖ẑ‖_∞`.
    pub support: Vec<usize>,
    /// OMP only: whether an exact correlation tie was resolved by index.
    pub tie_broken: bool,
}

impl SparseSolution {
    fn from_vector(p: &SparseProblem, z: CVec, iterations: usize, converged: bool) -> Self {
        let residual = (&p.data - matvec(&p.matrix, &z)).norm();
        let zmax = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let support = z.iter().enumerate().filter(|(_, v)| zmax > 0.0 && v.norm() > 1e-6 * zmax).map(|(j, _)| j).collect();
        SparseSolution {
            objective: z.iter().map(|v| v.norm()).sum(),
            residual,
            z_hat: z,
            iterations,
            converged,
            support,
            tie_broken: false,
        }
    }

    /// Indices of the `s` largest `|ẑ_j|` (lowest index first on ties), ascending.
    pub fn top_support(&self, s: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.z_hat.len()).collect();
        order.sort_by(|&a, &b| self.z_hat[b].norm().total_cmp(&self.z_hat[a].norm()).then(a.cmp(&b)));
        let mut top = order[..s.min(order.len())].to_vec();
        top.sort_unstable();
        top
    }

    /// Residual constraint up to `1e−6` relative slack.
    pub fn feasible(&self, p: &SparseProblem) -> bool {
        self.residual <= p.epsilon + 1e-6 * p.epsilon.max(p.data.norm())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BpdnOptions {
    /// Relative primal/dual residual tolerance.
    pub tol: f64,
    pub max_iters: usize,
    /// Initial penalty; chosen from the data scale when absent.
    pub rho: Option<f64>,
    /// For `ε = 0`, test a least-squares candidate against a dual certificate
    /// every this many iterations (0 disables); a passing certificate proves optimality.
    pub certify_every: usize,
}

impl Default for BpdnOptions {
    fn default() -> Self {
        BpdnOptions { tol: 1e-8, max_iters: 50_000, rho: None, certify_every: 0 }
    }
}

/// Iterations during which the penalty is rebalanced.
const ADAPT_ITERS: usize = 100;

fn soft_threshold(v: C64, t: f64) -> C64 {
    let m = v.norm();
    if m <= t {
        C64::new(0.0, 0.0)
    } else {
        v * ((m - t) / m)
    }
}

fn project_ball(v: &CVec, center: &CVec, radius: f64) -> CVec {
    let d = v - center;
    let nd = d.norm();
    if nd <= radius {
        v.clone()
    } else {
        center + d * C64::new(radius / nd, 0.0)
    }
}

/// Linear solver for `(I + AᴴA) x = b`, through the smaller of the two Gram matrices.
enum XSolver {
    /// Factor of `K = I + AAᴴ` (M ≤ N).
    Woodbury { chol: nalgebra::Cholesky<C64, nalgebra::Dyn> },
    Direct { chol: nalgebra::Cholesky<C64, nalgebra::Dyn> },
}

impl XSolver {
    fn new(a: &CMat) -> Result<Self> {
        let (m, n) = a.shape();
        if m <= n {
            let k = mul_adjoint(a, a) + CMat::identity(m, m);
            let chol = k.cholesky().ok_or_else(|| invalid("I + AAᴴ is not positive definite"))?;
            Ok(XSolver::Woodbury { chol })
        } else {
            let k = adjoint_mul(a, a) + CMat::identity(n, n);
            let chol = k.cholesky().ok_or_else(|| invalid("I + AᴴA is not positive definite"))?;
            Ok(XSolver::Direct { chol })
        }
    }

    /// Returns `(x, Ax)` for `x = argmin ‖x − p‖² + ‖Ax − q‖²`.
    fn solve(&self, a: &SplitOperator, p: &CVec, q: &CVec) -> (CVec, CVec) {
        match self {
            XSolver::Woodbury { chol } => {
                // Ax = K⁻¹(Ap + AAᴴq) = q + K⁻¹(Ap − q).
                let ax = q + chol.solve(&(a.apply(p) - q));
                let x = p + a.apply_adjoint(&(q - &ax));
                (x, ax)
            }
            XSolver::Direct { chol } => {
                let x = chol.solve(&(p + a.apply_adjoint(q)));
                let ax = a.apply(&x);
                (x, ax)
            }
        }
    }
}

/// Least-squares fit on `support` if it reproduces the data exactly and a dual
/// certificate proves it is the unique minimum-ℓ1 solution.
fn certified_bp(p: &SparseProblem, support: &[usize]) -> Option<CVec> {
    let m = p.n();
    if support.is_empty() || support.len() > m {
        return None;
    }
    let at = select_columns(&p.matrix, support);
    let svd = crate::linalg::Svd::new(&at);
    let (smin, smax) = (svd.min(), svd.max());
    if !(smin > 1e-10 * smax) {
        return None;
    }
    let rhs = CMat::from_column_slice(m, 1, p.data.as_slice());
    let zt = svd.solve(&rhs, 0.0);
    let fit = &at * &zt;
    if (&rhs - fit).norm() > 1e-10 * p.data.norm().max(f64::MIN_POSITIVE) {
        return None;
    }
    if zt.iter().any(|v| v.norm() == 0.0) {
        return None;
    }
    // Minimum-norm v with A_Tᴴ v = sign(z_T).
    let sign = CMat::from_fn(support.len(), 1, |i, _| zt[(i, 0)] / zt[(i, 0)].norm());
    let gram = adjoint_mul(&at, &at);
    let w = gram.lu().solve(&sign)?;
    let v = &at * w;
    let corr = adjoint_mul(&p.matrix, &v);
    let on = |j: usize| support.contains(&j);
    if (0..p.n_points()).any(|j| !on(j) && corr[(j, 0)].norm() >= 1.0 - 1e-9) {
        return None;
    }
    let mut z = CVec::zeros(p.n_points());
    for (i, &j) in support.iter().enumerate() {
        z[j] = zt[(i, 0)];
    }
    Some(z)
}

/// Supports cut at the two largest magnitude ratios of the iterate, plus its
/// full nonzero support, keeping at most `max_len` indices.
fn candidate_supports(u: &CVec, max_len: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..u.len()).filter(|&j| u[j].norm() > 0.0).collect();
    order.sort_by(|&a, &b| u[b].norm().total_cmp(&u[a].norm()).then(a.cmp(&b)));
    let mut cuts: Vec<(f64, usize)> = (1..order.len().min(max_len))
        .map(|k| (u[order[k - 1]].norm() / u[order[k]].norm(), k))
        .collect();
    cuts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut lens: Vec<usize> = cuts.iter().take(2).map(|c| c.1).collect();
    if order.len() <= max_len {
        lens.push(order.len());
    }
    lens.dedup();
    lens.into_iter()
        .filter(|&k| k > 0)
        .map(|k| {
            let mut t = order[..k].to_vec();
            t.sort_unstable();
            t
        })
        .collect()
}

/// Basis pursuit denoising by ADMM on the splitting `u = z`, `w = Φ̃z`, with a
/// magnitude soft-threshold for `u`, projection onto the `ε`-ball for `w`, and
/// residual-balancing penalty updates.
pub fn bpdn_solve(p: &SparseProblem, opts: &BpdnOptions) -> Result<SparseSolution> {
    let a = &p.matrix;
    let (m, n) = a.shape();
    let y = &p.data;
    let ynorm = y.norm();
    if ynorm <= p.epsilon {
        return Ok(SparseSolution::from_vector(p, CVec::zeros(n), 0, true));
    }
    let solver = XSolver::new(a)?;
    let op = SplitOperator::new(a);
    let aty = adjoint_matvec(a, y);
    let scale = aty.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut rho = opts.rho.unwrap_or(10.0 / scale);
    let mut u = CVec::zeros(n);
    let mut w = y.clone();
    let mut lam = CVec::zeros(n);
    let mut nu = CVec::zeros(m);
    let check_every = 10;
    let mut best: Option<(f64, CVec)> = None;
    for it in 1..=opts.max_iters {
        let w_old = w.clone();
        let u_old = u.clone();
        let (x, ax) = solver.solve(&op, &(&u - &lam), &(&w - &nu));
        u = (&x + &lam).map(|v| soft_threshold(v, 1.0 / rho));
        w = project_ball(&(&ax + &nu), y, p.epsilon);
        let rx = &x - &u;
        let rw = &ax - &w;
        lam += &rx;
        nu += &rw;
        if opts.certify_every > 0 && p.epsilon == 0.0 && it % opts.certify_every == 0 {
            if let Some(z) = candidate_supports(&u, m).iter().find_map(|t| certified_bp(p, t)) {
                return Ok(SparseSolution::from_vector(p, z, it, true));
            }
        }
        if it % check_every != 0 && it != opts.max_iters {
            continue;
        }
        let r_norm = (rx.norm_squared() + rw.norm_squared()).sqrt();
        let s_norm = rho * (&u - &u_old + op.apply_adjoint(&(&w - &w_old))).norm();
        let primal_scale = (x.norm_squared() + ax.norm_squared()).sqrt().max((u.norm_squared() + w.norm_squared()).sqrt());
        // λ + Aᴴν vanishes at the optimum, so scale by the multipliers themselves.
        let dual_scale = rho * (lam.norm_squared() + nu.norm_squared()).sqrt();
        let eps_pri = opts.tol * primal_scale.max(ynorm);
        let eps_dual = opts.tol * dual_scale.max(1e-300);
        let resid = (y - op.apply(&u)).norm();
        if resid <= p.epsilon + 1e-6 * p.epsilon.max(ynorm) {
            let obj: f64 = u.iter().map(|v| v.norm()).sum();
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, u.clone()));
            }
        }
        if r_norm <= eps_pri && s_norm <= eps_dual {
            return Ok(finish(p, u, it, true));
        }
        // Balancing ρ indefinitely can cycle; freezing it keeps the fixed-penalty guarantee.
        if it > ADAPT_ITERS {
            continue;
        }
        if r_norm > 10.0 * s_norm {
            rho *= 2.0;
            lam /= C64::new(2.0, 0.0);
            nu /= C64::new(2.0, 0.0);
        } else if s_norm > 10.0 * r_norm {
            rho /= 2.0;
            lam *= C64::new(2.0, 0.0);
            nu *= C64::new(2.0, 0.0);
        }
    }
    let z = best.map(|(_, z)| z).unwrap_or(u);
    Ok(finish(p, z, opts.max_iters, false))
}

fn finish(p: &SparseProblem, z: CVec, iterations: usize, converged: bool) -> SparseSolution {
    if p.epsilon == 0.0 {
        let zmax = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let support: Vec<usize> = (0..z.len()).filter(|&j| z[j].norm() > 1e-6 * zmax).collect();
        if let Some(polished) = certified_bp(p, &support) {
            return SparseSolution::from_vector(p, polished, iterations, true);
        }
    }
    SparseSolution::from_vector(p, z, iterations, converged)
}

/// Orthogonal matching pursuit for at most `s` atoms, stopping early once the
/// residual drops to `ε`.
pub fn omp_solve(p: &SparseProblem, s: usize) -> Result<SparseSolution> {
    let a = &p.matrix;
    let (m, n) = a.shape();
    if s > m {
        return Err(invalid(format!("target sparsity {s} exceeds {m} measurements")));
    }
    let mut support: Vec<usize> = Vec::new();
    let mut resid = p.data.clone();
    let mut coef = CMat::zeros(0, 1);
    let mut tie_broken = false;
    let mut steps = 0;
    while support.len() < s && resid.norm() > p.epsilon {
        let corr = adjoint_matvec(a, &resid);
        let mags: Vec<f64> = corr.iter().map(|c| c.norm()).collect();
        let free: Vec<usize> = (0..n).filter(|j| !support.contains(j)).collect();
        let top = free.iter().map(|&j| mags[j]).fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<usize> = free.into_iter().filter(|&j| mags[j] == top).collect();
        let Some(&j) = ties.first() else { break };
        tie_broken |= ties.len() > 1;
        support.push(j);
        steps += 1;
        let at = select_columns(a, &support);
        let rhs = CMat::from_column_slice(m, 1, p.data.as_slice());
        coef = crate::linalg::Svd::new(&at).solve(&rhs, 1e-14);
        let fit = &at * &coef;
        resid = CVec::from_fn(m, |i, _| p.data[i] - fit[(i, 0)]);
    }
    let mut z = CVec::zeros(n);
    for (i, &j) in support.iter().enumerate() {
        z[j] = coef[(i, 0)];
    }
    let mut sol = SparseSolution::from_vector(p, z, steps, true);
    let mut sorted = support;
    sorted.sort_unstable();
    sol.support = sorted;
    sol.tie_broken = tie_broken;
    Ok(sol)
}

/// Sufficient conditions for exact OMP support recovery.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmpConditions {
    /// `ε/Z_min ≤ 1/2 + μ(1/2 − s)`.
    pub noise_margin: bool,
    /// `s < 1/2 + 1/(2μ)`.
    pub sparsity_limit: bool,
    pub margin_value: f64,
}

pub fn omp_conditions(mu: f64, s: usize, epsilon: f64, z_min: f64) -> OmpConditions {
    let margin_value = 0.5 + mu * (0.5 - s as f64);
    let sparsity_limit = mu == 0.0 || (s as f64) < 0.5 + 0.5 / mu;
    OmpConditions { noise_margin: z_min > 0.0 && epsilon / z_min <= margin_value, sparsity_limit, margin_value }
}

/// Constants of the BPDN error bound from RIC of order `2s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BpdnConstants {
    pub c1: f64,
    pub c2: f64,
    /// `(√2/2)δ⁺ + (√2/2 + 1)δ⁻`.
    pub condition_value: f64,
    pub condition_met: bool,
}

pub fn bpdn_error_constants(ric: &RicEstimate) -> BpdnConstants {
    bpdn_error_constants_values(ric.delta_plus, ric.delta_minus)
}

pub fn bpdn_error_constants_values(delta_plus: f64, delta_minus: f64) -> BpdnConstants {
    let h = std::f64::consts::SQRT_2 / 2.0;
    let condition_value = h * delta_plus + (h + 1.0) * delta_minus;
    let condition_met = condition_value < 1.0;
    let d = 1.0 - condition_value;
    let (c1, c2) = if condition_met {
        (
            (2.0 + (std::f64::consts::SQRT_2 - 2.0) * delta_minus + std::f64::consts::SQRT_2 * delta_plus) / d,
            4.0 * (1.0 + delta_plus).sqrt() / d,
        )
    } else {
        (f64::NAN, f64::NAN)
    };
    BpdnConstants { c1, c2, condition_value, condition_met }
}

/// `‖Z − Z^{(s)}‖₁`: ℓ1 mass outside the `s` largest entries.
pub fn best_s_term_tail(z: &CVec, s: usize) -> f64 {
    let mut mags: Vec<f64> = z.iter().map(|v| v.norm()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.iter().skip(s).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BpdnBoundReport {
    pub error: f64,
    pub bound: f64,
    pub satisfied: bool,
    pub applicable: bool,
}

/// Checks `‖ẑ − Z‖₂ ≤ C₁ s^{−1/2}‖Z − Z^{(s)}‖₁ + C₂ε`.
pub fn verify_bpdn_bound(
    p: &SparseProblem,
    sol: &SparseSolution,
    truth: &CVec,
    constants: &BpdnConstants,
    s: usize,
) -> BpdnBoundReport {
    let error = (&sol.z_hat - truth).norm();
    if !constants.condition_met || s == 0 {
        return BpdnBoundReport { error, bound: f64::NAN, satisfied: false, applicable: false };
    }
    let bound = constants.c1 * best_s_term_tail(truth, s) / (s as f64).sqrt() + constants.c2 * p.epsilon;
    BpdnBoundReport { error, bound, satisfied: error <= bound + 1e-9, applicable: true }
}

/// JSON form of a problem or solution: matrices row-major as `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub rows: usize,
    pub cols: usize,
    pub matrix: Vec<C64>,
    pub data: Vec<C64>,
    pub epsilon: f64,
}

impl ProblemFile {
    pub fn from_problem(p: &SparseProblem) -> Self {
        let (rows, cols) = p.matrix.shape();
        let matrix = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|(i, j)| p.matrix[(i, j)]).collect();
        ProblemFile { rows, cols, matrix, data: p.data.iter().cloned().collect(), epsilon: p.epsilon }
    }

    pub fn to_problem(&self) -> Result<SparseProblem> {
        if self.matrix.len() != self.rows * self.cols {
            return Err(Error::Format("matrix entry count does not match its shape".into()));
        }
        let m = CMat::from_row_slice(self.rows, self.cols, &self.matrix);
        SparseProblem::new(m, CVec::from_vec(self.data.clone()), self.epsilon)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub z_hat: Vec<C64>,
    pub objective: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub support: Vec<usize>,
}

impl From<&SparseSolution> for SolutionFile {
    fn from(s: &SparseSolution) -> Self {
        SolutionFile {
            z_hat: s.z_hat.iter().cloned().collect(),
            objective: s.objective,
            residual: s.residual,
            iterations: s.iterations,
            converged: s.converged,
            support: s.support.clone(),
        }
    }
}
