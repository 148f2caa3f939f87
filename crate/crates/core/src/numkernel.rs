//! Dense complex linear algebra: a row-major matrix type, Hermitian
//! eigendecomposition, complex SVD and spectral matrix functions.
//!
//! Eigen and singular-value solvers are delegated to nalgebra; this module
//! fixes orderings and phase conventions so results are deterministic.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Relative tolerance for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Absolute floor applied to every relative tolerance.
pub const ABS_FLOOR: f64 = 1e-14;

/// Dense complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Invalid("matrix has non-finite entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { ONE } else { ZERO })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(n, m, rows.concat())
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |r, c| if r == c { diag[r] } else { ZERO })
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |r, c| if r == c { C64::from(diag[r]) } else { ZERO })
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(dim: usize, columns: &[Vec<C64>]) -> Result<Self> {
        if columns.iter().any(|c| c.len() != dim) {
            return Err(Error::Dimension("column length mismatch".into()));
        }
        Ok(Self::from_fn(dim, columns.len(), |r, c| columns[c][r]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|k| self[(k, k)]).sum()
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_column(&mut self, c: usize, v: &[C64]) {
        debug_assert_eq!(v.len(), self.rows);
        for (r, &z) in v.iter().enumerate() {
            self[(r, c)] = z;
        }
    }

    /// Columns `idx` gathered into a new matrix, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        Self::from_fn(self.rows, idx.len(), |r, c| self[(r, idx[c])])
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols, "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|r| {
                let row = &self.data[r * self.cols..(r + 1) * self.cols];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (r2, c2) = (other.rows, other.cols);
        Self::from_fn(self.rows * r2, self.cols * c2, |r, c| {
            self[(r / r2, c / c2)] * other[(r % r2, c % c2)]
        })
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Spectral norm (largest singular value).
    pub fn norm_op(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        svd(self).map_or(f64::NAN, |s| s.singular.first().copied().unwrap_or(0.0))
    }

    /// ‖M − M†‖ in Frobenius norm.
    pub fn anti_hermitian_norm(&self) -> f64 {
        assert!(self.is_square());
        let mut acc = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                acc += (self[(r, c)] - self[(c, r)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale_re(0.5)
    }

    /// ‖M M† − 1‖ in Frobenius norm.
    pub fn unitarity_residual(&self) -> f64 {
        (&(self * &self.adjoint()) - &Self::identity(self.rows)).norm_fro()
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// `[a, b] = ab − ba`
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    &(a * b) - &(b * a)
}

#[derive(Clone, Debug)]
pub struct HermitianEig {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors; largest-magnitude component real positive.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let v = &self.eigenvectors;
        &(v * &ComplexMatrix::from_real_diag(&self.eigenvalues)) * &v.adjoint()
    }

    /// `V f(Λ) V†`
    pub fn apply(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let d: Vec<C64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let v = &self.eigenvectors;
        &(v * &ComplexMatrix::from_diag(&d)) * &v.adjoint()
    }
}

fn check_hermitian(m: &ComplexMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "expected square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let ah = m.anti_hermitian_norm();
    if ah > (HERMITIAN_TOL * m.norm_fro()).max(ABS_FLOOR) {
        return Err(Error::NotHermitian {
            anti_hermitian_norm: ah,
        });
    }
    Ok(())
}

/// Unit factor making the largest-magnitude entry of `v` (lowest index on ties) real positive.
pub fn canonical_phase_factor(v: &[C64]) -> C64 {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (k, z) in v.iter().enumerate() {
        if z.norm() > best_abs + 1e-12 {
            best = k;
            best_abs = z.norm();
        }
    }
    if best_abs > 0.0 {
        v[best].conj() / best_abs
    } else {
        ONE
    }
}

pub fn canonical_phase(v: &mut [C64]) {
    let phase = canonical_phase_factor(v);
    v.iter_mut().for_each(|z| *z *= phase);
}

pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEig> {
    check_hermitian(m)?;
    let n = m.rows();
    if n == 0 {
        return Ok(HermitianEig {
            eigenvalues: vec![],
            eigenvectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let sym = m.hermitian_part().to_nalgebra();
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = ComplexMatrix::zeros(n, n);
    for (c, &k) in order.iter().enumerate() {
        let mut v: Vec<C64> = eig.eigenvectors.column(k).iter().copied().collect();
        canonical_phase(&mut v);
        eigenvectors.set_column(c, &v);
    }
    let out = HermitianEig {
        eigenvalues,
        eigenvectors,
    };
    let defect = (&out.reconstruct() - m).norm_fro();
    if defect > 1e-10 * m.norm_fro().max(1.0) {
        return Err(Error::Invalid(format!(
            "eigendecomposition failed verification (defect {defect:.3e})"
        )));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SvdResult {
    /// d1×r, orthonormal columns.
    pub left: ComplexMatrix,
    /// Descending, nonnegative, length r = min(d1, d2).
    pub singular: Vec<f64>,
    /// d2×r, orthonormal columns; A = L·diag(σ)·R†.
    pub right: ComplexMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let s: Vec<C64> = self.singular.iter().map(|&x| C64::from(x)).collect();
        &(&self.left * &ComplexMatrix::from_diag(&s)) * &self.right.adjoint()
    }
}

fn svd_attempt(a: &DMatrix<C64>, eps: Option<f64>) -> Option<SvdResult> {
    let res = match eps {
        None => nalgebra::SVD::new(a.clone(), true, true),
        Some(e) => nalgebra::SVD::try_new(a.clone(), true, true, e, 0)?,
    };
    let (u, vt) = (res.u?, res.v_t?);
    let r = res.singular_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&x, &y| res.singular_values[y].total_cmp(&res.singular_values[x]));
    Some(SvdResult {
        left: ComplexMatrix::from_fn(a.nrows(), r, |row, c| u[(row, order[c])]),
        singular: order.iter().map(|&k| res.singular_values[k].max(0.0)).collect(),
        right: ComplexMatrix::from_fn(a.ncols(), r, |row, c| vt[(order[c], row)].conj()),
    })
}

impl SvdResult {
    fn adjoint(self) -> Self {
        Self {
            left: self.right,
            singular: self.singular,
            right: self.left,
        }
    }

    /// Worst of the reconstruction error and the two isometry defects.
    fn defect(&self, a: &ComplexMatrix) -> f64 {
        let r = self.singular.len();
        let iso = |m: &ComplexMatrix| (&(&m.adjoint() * m) - &ComplexMatrix::identity(r)).norm_fro();
        (&self.reconstruct() - a)
            .norm_fro()
            .max(iso(&self.left) * a.norm_fro().max(1.0))
            .max(iso(&self.right) * a.norm_fro().max(1.0))
    }
}

/// Thin SVD with descending singular values.
///
/// The backend occasionally returns an inconsistent factorization for
/// rank-deficient complex input, so every result is verified. Unless the
/// first attempt is exact to rounding, the backend is retried on the adjoint
/// and with other convergence thresholds, a Jacobi factorization is added,
/// and the candidate with the smallest defect wins.
pub fn svd(a: &ComplexMatrix) -> Result<SvdResult> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::Dimension("svd of an empty matrix".into()));
    }
    let scale = a.norm_fro().max(1.0);
    let m = a.to_nalgebra();
    if let Some(s) = svd_attempt(&m, None) {
        if s.defect(a) <= 1e-13 * scale {
            return Ok(s);
        }
    }
    let mt = m.adjoint();
    let mut candidates: Vec<SvdResult> = Vec::new();
    for eps in [None, Some(1e-14), Some(1e-12)] {
        candidates.extend(svd_attempt(&m, eps));
        candidates.extend(svd_attempt(&mt, eps).map(SvdResult::adjoint));
    }
    candidates.push(if a.rows() >= a.cols() {
        jacobi_svd(a)
    } else {
        jacobi_svd(&a.adjoint()).adjoint()
    });
    let (d, best) = candidates
        .into_iter()
        .map(|s| (s.defect(a), s))
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .expect("at least the Jacobi candidate");
    if d <= 1e-10 * scale {
        Ok(best)
    } else {
        Err(Error::Invalid(format!("svd failed verification (defect {d:.3e})")))
    }
}

/// One-sided (Hestenes) Jacobi SVD for `rows ≥ cols`. Slow but accurate for
/// tiny singular values; used when the backend result fails verification.
fn jacobi_svd(a: &ComplexMatrix) -> SvdResult {
    let (m, n) = (a.rows(), a.cols());
    let mut w: Vec<Vec<C64>> = (0..n).map(|c| a.column(c)).collect();
    let mut v: Vec<Vec<C64>> = (0..n)
        .map(|c| (0..n).map(|r| if r == c { ONE } else { ZERO }).collect())
        .collect();
    let dot = |x: &[C64], y: &[C64]| x.iter().zip(y).map(|(p, q)| p.conj() * q).sum::<C64>();
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = dot(&w[i], &w[i]).re;
                let beta = dot(&w[j], &w[j]).re;
                let gamma = dot(&w[i], &w[j]);
                let g = gamma.norm();
                if g <= 1e-15 * (alpha * beta).sqrt() || g < 1e-300 {
                    continue;
                }
                rotated = true;
                // Make the pair overlap real, then apply a real rotation.
                let ph = (gamma / g).conj();
                for x in w[j].iter_mut().chain(v[j].iter_mut()) {
                    *x *= ph;
                }
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for cols in [&mut w, &mut v] {
                    let (lo, hi) = cols.split_at_mut(j);
                    for (x, y) in lo[i].iter_mut().zip(hi[0].iter_mut()) {
                        let (p, q) = (*x, *y);
                        *x = p * c - q * s;
                        *y = p * s + q * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = w.iter().map(|c| dot(c, c).re.sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]));
    let floor = ABS_FLOOR * sigma[order[0]].max(1.0);
    let mut left: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for (slot, &c) in order.iter().enumerate() {
        if sigma[c] > floor {
            left.push(w[c].iter().map(|x| x / sigma[c]).collect());
        } else {
            left.push(vec![ZERO; m]);
            pending.push(slot);
        }
    }
    // Null-space columns: complete with Gram–Schmidt over unit vectors.
    let mut e = 0;
    for slot in pending {
        while e < m {
            let mut cand: Vec<C64> = (0..m).map(|r| if r == e { ONE } else { ZERO }).collect();
            e += 1;
            for _ in 0..2 {
                for (s2, u) in left.iter().enumerate() {
                    if s2 == slot || u.iter().all(|x| *x == ZERO) {
                        continue;
                    }
                    let p = dot(u, &cand);
                    cand.iter_mut().zip(u).for_each(|(x, y)| *x -= p * y);
                }
            }
            let nrm = dot(&cand, &cand).re.sqrt();
            if nrm > 0.5 {
                left[slot] = cand.iter().map(|x| x / nrm).collect();
                break;
            }
        }
    }
    SvdResult {
        left: ComplexMatrix::from_fn(m, n, |r, c| left[c][r]),
        singular: order.iter().map(|&c| sigma[c]).collect(),
        right: ComplexMatrix::from_fn(n, n, |r, c| v[order[c]][r]),
    }
}

/// `exp(−i·s·H)` via the spectral decomposition of `H`.
pub fn unitary_exp(h: &ComplexMatrix, s: f64) -> Result<ComplexMatrix> {
    let d = unitary_exp_minus_identity(h, s)?;
    Ok(&ComplexMatrix::identity(d.rows()) + &d)
}

/// `exp(−i·s·H) − 1`.
///
/// Kept apart from the identity: for a short step the entries are small, so
/// the unitarity defect of `1 + D` is resolved far below one ulp of 1. Built
/// as one matrix `1 + D`, the propagator carries a uniform sub-ulp contraction
/// that repeated application turns into a linear norm drift.
pub fn unitary_exp_minus_identity(h: &ComplexMatrix, s: f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(h)?;
    // cos x − 1 = −2 sin²(x/2) avoids the cancellation.
    let mut d = eig.apply(|l| {
        let x = s * l;
        C64::new(-2.0 * (0.5 * x).sin().powi(2), -x.sin())
    });
    let one = ComplexMatrix::identity(d.rows());
    // Newton–Schulz `U ← U(3 − U†U)/2` with `U†U − 1 = D + D† + D†D`.
    for _ in 0..2 {
        let dh = d.adjoint();
        let e = &(&d + &dh) + &(&dh * &d);
        d = &d - &(&(&one + &d) * &e).scale_re(0.5);
    }
    Ok(d)
}

/// Unitary (isometric, for tall input) polar factor `L R†` of `A = L Σ R†`.
/// Equals Löwdin orthonormalization of the columns of `A`.
pub fn polar_unitary(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let s = svd(a)?;
    Ok(&s.left * &s.right.adjoint())
}

/// Unitary `W` maximizing `Re tr(M·W)`.
pub fn procrustes(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(polar_unitary(m)?.adjoint())
}
