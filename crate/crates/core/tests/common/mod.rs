#![allow(dead_code)]

use rand::Rng;
use sparse_music::linalg::{CMat, CVec, C64};
use sparse_music::rng::rng;
use std::f64::consts::PI;

/// `n` distinct rows of the `N`-point DFT, scaled to unit columns.
pub fn partial_fourier(n: usize, big_n: usize, seed: u64) -> CMat {
    let mut g = rng(seed);
    let mut rows = rand::seq::index::sample(&mut g, big_n, n).into_vec();
    rows.sort_unstable();
    let scale = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, big_n, |i, j| C64::from_polar(scale, -2.0 * PI * (rows[i] * j) as f64 / big_n as f64))
}

/// Complex Gaussian matrix with unit columns.
pub fn gaussian_unit(n: usize, big_n: usize, seed: u64) -> CMat {
    let mut g = rng(seed);
    let mut m = CMat::from_fn(n, big_n, |_, _| C64::new(g.random::<f64>() - 0.5, g.random::<f64>() - 0.5));
    for mut c in m.column_iter_mut() {
        let nrm = c.norm();
        c /= C64::new(nrm, 0.0);
    }
    m
}

pub fn random_vec(n: usize, seed: u64) -> CVec {
    let mut g = rng(seed);
    CVec::from_fn(n, |_, _| C64::new(2.0 * g.random::<f64>() - 1.0, 2.0 * g.random::<f64>() - 1.0))
}

pub fn random_mat(n: usize, m: usize, seed: u64) -> CMat {
    let mut g = rng(seed);
    CMat::from_fn(n, m, |_, _| C64::new(2.0 * g.random::<f64>() - 1.0, 2.0 * g.random::<f64>() - 1.0))
}

/// `s`-sparse vector on a random support with magnitudes in `[1, 2]` and random phases.
pub fn sparse_vec(big_n: usize, s: usize, seed: u64) -> (CVec, Vec<usize>) {
    let mut g = rng(seed);
    let mut supp = rand::seq::index::sample(&mut g, big_n, s).into_vec();
    supp.sort_unstable();
    let mut z = CVec::zeros(big_n);
    for &j in &supp {
        z[j] = C64::from_polar(1.0 + g.random::<f64>(), 2.0 * PI * g.random::<f64>());
    }
    (z, supp)
}

/// Minimum-ℓ1 solution of `Az = y` over all supports of size at most `k`
/// (least squares on each support, kept when the residual vanishes).
pub fn combinatorial_bp(a: &CMat, y: &CVec, k: usize) -> Option<(CVec, f64)> {
    use itertools::Itertools;
    let n = a.ncols();
    let mut best: Option<(CVec, f64)> = None;
    let tol = 1e-9 * y.norm().max(1.0);
    if y.norm() <= tol {
        return Some((CVec::zeros(n), 0.0));
    }
    for size in 1..=k {
        for supp in (0..n).combinations(size) {
            let sub = CMat::from_fn(a.nrows(), size, |i, j| a[(i, supp[j])]);
            // Normal equations by LU, independent of the library's SVD path.
            let gram = sub.adjoint() * &sub;
            let Some(c) = gram.lu().solve(&(sub.adjoint() * y)) else { continue };
            if (y - &sub * &c).norm() > tol {
                continue;
            }
            let obj: f64 = c.iter().map(|v| v.norm()).sum();
            if best.as_ref().is_none_or(|(_, b)| obj < *b) {
                let mut z = CVec::zeros(n);
                for (i, &j) in supp.iter().enumerate() {
                    z[j] = c[i];
                }
                best = Some((z, obj));
            }
        }
    }
    best
}

/// Haar-like random unitary from the QR factor of a complex Gaussian-ish matrix.
pub fn random_unitary(n: usize, seed: u64) -> CMat {
    random_mat(n, n, seed).qr().q()
}

/// `U [I | F_sub] D P`: 8×12 with unit columns and `δ₂ = 1/√8`.
pub fn tiny_instance(seed: u64) -> CMat {
    let mut g = rng(seed ^ 0x5eed);
    let n = 8;
    let mut base = CMat::zeros(n, 12);
    for i in 0..n {
        base[(i, i)] = C64::new(1.0, 0.0);
    }
    let mut freqs = rand::seq::index::sample(&mut g, n, 4).into_vec();
    freqs.sort_unstable();
    let scale = 1.0 / (n as f64).sqrt();
    for (k, &f) in freqs.iter().enumerate() {
        for i in 0..n {
            base[(i, n + k)] = C64::from_polar(scale, -2.0 * PI * (f * i) as f64 / n as f64);
        }
    }
    let mut perm: Vec<usize> = (0..12).collect();
    rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut g);
    let phases: Vec<C64> = (0..12).map(|_| C64::from_polar(1.0, 2.0 * PI * g.random::<f64>())).collect();
    let u = random_unitary(n, seed);
    CMat::from_fn(n, 12, |i, j| (0..n).map(|k| u[(i, k)] * base[(k, perm[j])]).sum::<C64>() * phases[j])
}
