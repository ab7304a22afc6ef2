//! Dense complex linear algebra helpers on top of nalgebra. Large products go
//! through the packed `zgemm` kernel of `matrixmultiply`, which is several times
//! faster than the generic complex product for the grid-sized matrices used here.
//! Singular value and Hermitian eigenvalue decompositions use faer: nalgebra's
//! complex SVD returns wrong factors on some rank-deficient inputs.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// `alpha * op(A) * B` for column-major operands, where op(A) is described by strides.
#[allow(clippy::too_many_arguments)]
fn zgemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[C64],
    rsa: isize,
    csa: isize,
    b: &[C64],
    rsb: isize,
    csb: isize,
) -> CMat {
    let mut c = CMat::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: Complex64 is repr(C) with layout [f64; 2]; the strides address
    // in-bounds elements of `a` (m×k) and `b` (k×n), and `c` is a fresh m×n
    // column-major buffer with non-aliasing strides.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            rsa,
            csa,
            b.as_ptr() as *const [f64; 2],
            rsb,
            csb,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    c
}

/// `A B`.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matmul: inner dimensions differ");
    let (m, k) = a.shape();
    zgemm(m, k, b.ncols(), a.as_slice(), 1, m as isize, b.as_slice(), 1, k as isize)
}

/// `Aᴴ B`.
pub fn adjoint_mul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.nrows(), b.nrows(), "adjoint_mul: row counts differ");
    let (k, m) = a.shape();
    let ac: Vec<C64> = a.iter().map(|z| z.conj()).collect();
    zgemm(m, k, b.ncols(), &ac, k as isize, 1, b.as_slice(), 1, k as isize)
}

/// `A Bᴴ`.
pub fn mul_adjoint(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.ncols(), "mul_adjoint: column counts differ");
    let (m, k) = a.shape();
    let n = b.nrows();
    let bc: Vec<C64> = b.iter().map(|z| z.conj()).collect();
    zgemm(m, k, n, a.as_slice(), 1, m as isize, &bc, n as isize, 1)
}

/// `A x`.
pub fn matvec(a: &CMat, x: &CVec) -> CVec {
    assert_eq!(a.ncols(), x.len());
    let mut y = CVec::zeros(a.nrows());
    for (j, xj) in x.iter().enumerate() {
        if *xj == C64::new(0.0, 0.0) {
            continue;
        }
        let col = a.column(j);
        for (yi, aij) in y.iter_mut().zip(col.iter()) {
            *yi += aij * xj;
        }
    }
    y
}

/// `Aᴴ x`.
pub fn adjoint_matvec(a: &CMat, x: &CVec) -> CVec {
    assert_eq!(a.nrows(), x.len());
    CVec::from_iterator(
        a.ncols(),
        a.column_iter().map(|c| c.iter().zip(x.iter()).map(|(a, b)| a.conj() * b).sum::<C64>()),
    )
}

/// A fixed matrix stored as separate real and imaginary planes, in both
/// column-major order and as the adjoint, for repeated products with vectors.
/// Both products reduce to real axpy loops that vectorize.
#[derive(Clone, Debug)]
pub struct SplitOperator {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    /// Planes of `Aᴴ`.
    re_h: Vec<f64>,
    im_h: Vec<f64>,
}

fn split_axpy(yr: &mut [f64], yi: &mut [f64], ar: &[f64], ai: &[f64], xr: f64, xi: f64) {
    for (((yr, yi), &ar), &ai) in yr.iter_mut().zip(yi.iter_mut()).zip(ar).zip(ai) {
        *yr += ar * xr - ai * xi;
        *yi += ar * xi + ai * xr;
    }
}

impl SplitOperator {
    pub fn new(a: &CMat) -> Self {
        let (rows, cols) = a.shape();
        let t = a.transpose();
        SplitOperator {
            rows,
            cols,
            re: a.iter().map(|z| z.re).collect(),
            im: a.iter().map(|z| z.im).collect(),
            re_h: t.iter().map(|z| z.re).collect(),
            im_h: t.iter().map(|z| -z.im).collect(),
        }
    }

    /// `A x`.
    pub fn apply(&self, x: &CVec) -> CVec {
        assert_eq!(x.len(), self.cols);
        let (mut yr, mut yi) = (vec![0.0; self.rows], vec![0.0; self.rows]);
        for (j, v) in x.iter().enumerate() {
            if v.re != 0.0 || v.im != 0.0 {
                let col = j * self.rows..(j + 1) * self.rows;
                split_axpy(&mut yr, &mut yi, &self.re[col.clone()], &self.im[col], v.re, v.im);
            }
        }
        CVec::from_iterator(self.rows, yr.into_iter().zip(yi).map(|(r, i)| C64::new(r, i)))
    }

    /// `Aᴴ x`.
    pub fn apply_adjoint(&self, x: &CVec) -> CVec {
        assert_eq!(x.len(), self.rows);
        let (mut yr, mut yi) = (vec![0.0; self.cols], vec![0.0; self.cols]);
        for (i, v) in x.iter().enumerate() {
            if v.re != 0.0 || v.im != 0.0 {
                let row = i * self.cols..(i + 1) * self.cols;
                split_axpy(&mut yr, &mut yi, &self.re_h[row.clone()], &self.im_h[row], v.re, v.im);
            }
        }
        CVec::from_iterator(self.cols, yr.into_iter().zip(yi).map(|(r, i)| C64::new(r, i)))
    }
}

fn to_faer(m: &CMat) -> faer::Mat<C64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, C64>) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin singular value decomposition `M = U diag(s) Vᴴ`, values descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

impl Svd {
    pub fn new(m: &CMat) -> Self {
        let k = m.nrows().min(m.ncols());
        if k == 0 {
            return Svd { u: CMat::zeros(m.nrows(), 0), s: Vec::new(), v: CMat::zeros(m.ncols(), 0) };
        }
        let f = to_faer(m).thin_svd().expect("SVD did not converge");
        let s = (0..k).map(|i| f.S()[i].re).collect();
        Svd { u: from_faer(f.U()), s, v: from_faer(f.V()) }
    }

    pub fn max(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.s.last().copied().unwrap_or(0.0)
    }

    /// Least-squares solution `V diag(1/s) Uᴴ b`, dropping values at or below `rcond·s_max`.
    pub fn solve(&self, b: &CMat, rcond: f64) -> CMat {
        let cut = rcond * self.max();
        let mut c = adjoint_mul(&self.u, b);
        for (i, mut row) in c.row_iter_mut().enumerate() {
            let si = self.s[i];
            if si > cut && si > 0.0 {
                row /= C64::new(si, 0.0);
            } else {
                row.fill(C64::new(0.0, 0.0));
            }
        }
        matmul(&self.v, &c)
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv = to_faer(m).singular_values().expect("SVD did not converge");
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Eigenvalues (ascending) of the Hermitian part of `h`.
pub fn hermitian_eigenvalues(h: &CMat) -> Vec<f64> {
    if h.is_empty() {
        return Vec::new();
    }
    let mut ev = to_faer(h).self_adjoint_eigenvalues(faer::Side::Lower).expect("eigensolver did not converge");
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigen-decomposition `h = Q diag(λ) Qᴴ` of a Hermitian matrix, values ascending.
pub fn hermitian_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    if h.is_empty() {
        return (Vec::new(), CMat::zeros(h.nrows(), 0));
    }
    let e = to_faer(h).self_adjoint_eigen(faer::Side::Lower).expect("eigensolver did not converge");
    let n = h.nrows();
    let ev: Vec<f64> = (0..n).map(|i| e.S()[i].re).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ev[a].total_cmp(&ev[b]));
    let q = from_faer(e.U());
    (order.iter().map(|&i| ev[i]).collect(), select_columns(&q, &order))
}

/// Euclidean norm of each column.
pub fn column_norms(m: &CMat) -> Vec<f64> {
    m.column_iter().map(|c| c.norm()).collect()
}

/// Scales every column to unit norm, returning the original norms.
pub fn normalize_columns(m: &mut CMat) -> Vec<f64> {
    let norms = column_norms(m);
    for (mut c, &nrm) in m.column_iter_mut().zip(norms.iter()) {
        if nrm > 0.0 {
            c.unscale_mut(nrm);
        }
    }
    norms
}

/// Columns with the given indices.
pub fn select_columns(m: &CMat, idx: &[usize]) -> CMat {
    CMat::from_fn(m.nrows(), idx.len(), |i, j| m[(i, idx[j])])
}

/// Full set of left singular vectors (n×n) together with the singular values
/// (length min(n, m), descending).
pub fn left_singular_system(y: &CMat) -> (CMat, Vec<f64>) {
    let (n, m) = y.shape();
    let r = n.min(m);
    if r == 0 {
        return (CMat::identity(n, n), Vec::new());
    }
    let f = to_faer(y).svd().expect("SVD did not converge");
    let sv = (0..r).map(|i| f.S()[i].re).collect();
    (from_faer(f.U()), sv)
}

/// Orthonormal basis of the column space of a full-column-rank matrix, with the
/// condition number of the input.
pub fn orthonormal_basis(m: &CMat) -> (CMat, f64) {
    let k = m.ncols();
    if k == 0 {
        return (CMat::zeros(m.nrows(), 0), 1.0);
    }
    let svd = Svd::new(m);
    let cond = if k > m.nrows() || svd.min() == 0.0 { f64::INFINITY } else { svd.max() / svd.min() };
    (svd.u, cond)
}

/// Largest |entry|.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
