//! Dense small-matrix kernels.
//!
//! Everything in this crate works with matrices of order ≤ ~12, so the
//! kernels here favour simple, well-understood algorithms: cyclic Jacobi for
//! the symmetric eigenproblem, textbook Cholesky, and Gauss-Jordan with
//! partial pivoting for inverses.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Off-diagonal Frobenius threshold for Jacobi, relative to ‖m‖_F.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
/// Cholesky pivots at or below this fraction of ‖m‖_F count as failure.
const PD_PIVOT_TOL: f64 = 1e-13;
/// Largest 1-norm condition estimate accepted by [`inverse`].
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("matrix is singular (condition estimate {0:e})")]
    Singular(f64),
    #[error("comparison matrix is not positive definite")]
    InvalidComparison,
    #[error("Jacobi iteration did not converge after {0} sweeps")]
    NoConvergence(usize),
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Rectangular "identity": ones on the leading diagonal.
    pub fn eye(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows.min(cols) {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericError> {
        if data.len() != rows * cols {
            return Err(NumericError::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices. Panics on ragged input; intended for
    /// literals and tests.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.as_ref().len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.as_ref().len(), c, "ragged matrix literal");
            data.extend_from_slice(row.as_ref());
        }
        Self { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Induced 1-norm (max column sum).
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix, NumericError> {
        if self.cols != rhs.rows {
            return Err(NumericError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "vector length mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Copy of the sub-block starting at (`r0`, `c0`).
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        let mut b = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                b[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        b
    }

    /// Adds `src` into the block starting at (`r0`, `c0`).
    pub fn add_block(&mut self, r0: usize, c0: usize, src: &Matrix) {
        assert!(r0 + src.rows <= self.rows && c0 + src.cols <= self.cols);
        for i in 0..src.rows {
            for j in 0..src.cols {
                self[(r0 + i, c0 + j)] += src[(i, j)];
            }
        }
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, src: &Matrix) {
        assert!(r0 + src.rows <= self.rows && c0 + src.cols <= self.cols);
        for i in 0..src.rows {
            for j in 0..src.cols {
                self[(r0 + i, c0 + j)] = src[(i, j)];
            }
        }
    }

    /// Largest |m(i,j) − m(j,i)|; infinite for non-square input.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    fn zip_with(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| f(*a, *b)).collect(),
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

/// Panics on inner-dimension mismatch; use [`Matrix::matmul`] for a checked product.
impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs).expect("matrix product dimension mismatch")
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix{}x{} ", self.rows, self.cols)?;
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }
}

/// Symmetric matrix. Construction either checks or enforces symmetry.
#[derive(Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Accepts `m` if it is square and symmetric to within 1e-12 relative.
    pub fn new(m: Matrix) -> Result<Self, NumericError> {
        if !m.is_square() || m.rows == 0 {
            return Err(NumericError::Dimension(format!(
                "symmetric matrix must be square with order >= 1, got {}x{}",
                m.rows, m.cols
            )));
        }
        let asym = m.asymmetry();
        if asym > 1e-12 * m.max_abs().max(1.0) {
            return Err(NumericError::NotSymmetric(asym));
        }
        Ok(Self::symmetrize(&m))
    }

    /// Symmetric part ½(m + mᵀ). Panics on non-square input.
    pub fn symmetrize(m: &Matrix) -> Self {
        assert!(m.is_square(), "symmetrize needs a square matrix");
        let n = m.rows;
        let mut s = m.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        SymMatrix(s)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(Matrix::identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(Matrix::zeros(n, n))
    }

    pub fn diag(values: &[f64]) -> Self {
        SymMatrix(Matrix::diag(values))
    }

    pub fn order(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        SymMatrix(self.0.scale(s))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.frobenius_norm()
    }

    /// Congruence `tᵀ·self·t`.
    pub fn congruence(&self, t: &Matrix) -> SymMatrix {
        SymMatrix::symmetrize(&(&(&t.transpose() * &self.0) * t))
    }

    pub fn add(&self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }

    pub fn sub(&self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }

    /// Principal submatrix over the given index set.
    pub fn principal(&self, idx: &[usize]) -> SymMatrix {
        let mut m = Matrix::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(a, b)] = self.0[(i, j)];
            }
        }
        SymMatrix(m)
    }

    pub fn lambda_max(&self) -> Result<f64, NumericError> {
        Ok(*sym_eigs(self)?.values.last().expect("order >= 1"))
    }

    pub fn lambda_min(&self) -> Result<f64, NumericError> {
        Ok(sym_eigs(self)?.values[0])
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sym")?;
        self.0.fmt(f)
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        SymMatrix::new(Matrix::deserialize(d)?).map_err(D::Error::custom)
    }
}

/// Eigen-decomposition `m = V·diag(values)·Vᵀ`, eigenvalues ascending,
/// eigenvectors stored as columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.vectors.rows()).map(|i| self.vectors[(i, k)]).collect()
    }

    pub fn reconstruct(&self) -> Matrix {
        let n = self.values.len();
        let mut out = Matrix::zeros(n, n);
        for k in 0..n {
            let lam = self.values[k];
            for i in 0..n {
                let vi = self.vectors[(i, k)] * lam;
                for j in 0..n {
                    out[(i, j)] += vi * self.vectors[(j, k)];
                }
            }
        }
        out
    }
}

/// Cyclic Jacobi eigensolver.
pub fn sym_eigs(m: &SymMatrix) -> Result<SymEigen, NumericError> {
    let n = m.order();
    let mut a = m.as_matrix().clone();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm();
    let threshold = JACOBI_TOL * scale;

    let off = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off(&a) <= threshold;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(NumericError::NoConvergence(sweeps));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        converged = off(&a) <= threshold;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// `λ_max(m) < −margin`. Eigen failures count as "not definite".
pub fn is_negative_definite(m: &SymMatrix, margin: f64) -> bool {
    debug_assert!(margin >= 0.0);
    m.lambda_max().is_ok_and(|l| l < -margin)
}

pub fn is_positive_definite(m: &SymMatrix, margin: f64) -> bool {
    m.lambda_min().is_ok_and(|l| l > margin)
}

/// Lower-triangular Cholesky factor.
pub fn cholesky(m: &SymMatrix) -> Result<Matrix, NumericError> {
    let n = m.order();
    let tol = PD_PIVOT_TOL * m.frobenius_norm();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > tol) {
            return Err(NumericError::NotPositiveDefinite { index: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(m: &Matrix) -> Result<Matrix, NumericError> {
    if !m.is_square() {
        return Err(NumericError::Dimension(format!(
            "inverse of a {}x{} matrix",
            m.rows, m.cols
        )));
    }
    let n = m.rows;
    let mut a = m.clone();
    let mut inv = Matrix::identity(n);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
            .expect("non-empty range");
        let pivot = a[(pivot_row, col)];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(NumericError::Singular(f64::INFINITY));
        }
        if pivot_row != col {
            for k in 0..n {
                a.data.swap(col * n + k, pivot_row * n + k);
                inv.data.swap(col * n + k, pivot_row * n + k);
            }
        }
        let p = a[(col, col)];
        for k in 0..n {
            a[(col, k)] /= p;
            inv[(col, k)] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[(r, col)];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                a[(r, k)] -= f * a[(col, k)];
                inv[(r, k)] -= f * inv[(col, k)];
            }
        }
    }
    let cond = m.norm_1() * inv.norm_1();
    if !(cond <= MAX_CONDITION) {
        return Err(NumericError::Singular(cond));
    }
    Ok(inv)
}

/// Inverse of a symmetric positive-definite matrix, returned symmetric.
pub fn sym_inverse(m: &SymMatrix) -> Result<SymMatrix, NumericError> {
    Ok(SymMatrix::symmetrize(&inverse(m.as_matrix())?))
}

/// Solves `L·x = b` column by column for lower-triangular `l`.
fn forward_solve(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows();
    let mut x = Matrix::zeros(n, b.cols());
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = b[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Smallest `s` with `a ⪯ s·b`, i.e. `λ_max(L⁻¹·a·L⁻ᵀ)` for `b = L·Lᵀ`.
pub fn gen_eig_max(a: &SymMatrix, b: &SymMatrix) -> Result<f64, NumericError> {
    if a.order() != b.order() {
        return Err(NumericError::Dimension(format!(
            "pencil orders {} and {}",
            a.order(),
            b.order()
        )));
    }
    let l = cholesky(b).map_err(|_| NumericError::InvalidComparison)?;
    // C = L⁻¹ a L⁻ᵀ, built as L⁻¹ (L⁻¹ a)ᵀ using symmetry of a.
    let y = forward_solve(&l, a.as_matrix());
    let c = forward_solve(&l, &y.transpose());
    SymMatrix::symmetrize(&c).lambda_max()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(rows: &[&[f64]]) -> SymMatrix {
        SymMatrix::new(Matrix::from_rows(rows)).unwrap()
    }

    #[test]
    fn eigs_of_identity_and_diagonal() {
        let e = sym_eigs(&SymMatrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        let e = sym_eigs(&SymMatrix::diag(&[2.0, -5.0])).unwrap();
        assert_eq!(e.values, vec![-5.0, 2.0]);
    }

    #[test]
    fn eigs_of_swap_matrix() {
        // λ² − 1 = 0
        let e = sym_eigs(&sym(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let err = (&e.reconstruct() - &Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]])).frobenius_norm();
        assert!(err < 1e-12);
    }

    #[test]
    fn negative_definiteness_cases() {
        assert!(is_negative_definite(&SymMatrix::identity(2).scale(-1.0), 0.5));
        assert!(!is_negative_definite(&SymMatrix::zeros(2), 0.0));
        // eigenvalues −3 and 1
        assert!(!is_negative_definite(&sym(&[&[-1.0, 2.0], &[2.0, -1.0]]), 0.0));
    }

    #[test]
    fn cholesky_cases() {
        assert_eq!(cholesky(&SymMatrix::identity(3)).unwrap(), Matrix::identity(3));
        let l = cholesky(&sym(&[&[4.0, 2.0], &[2.0, 2.0]])).unwrap();
        let expected = Matrix::from_rows(&[[2.0, 0.0], [1.0, 1.0]]);
        assert!((&l - &expected).max_abs() < 1e-15);
        assert!(matches!(
            cholesky(&sym(&[&[1.0, 2.0], &[2.0, 1.0]])),
            Err(NumericError::NotPositiveDefinite { .. })
        ));
        assert!(cholesky(&SymMatrix::zeros(2)).is_err());
    }

    #[test]
    fn inverse_cases() {
        assert_eq!(inverse(&Matrix::identity(2)).unwrap(), Matrix::identity(2));
        let inv = inverse(&Matrix::diag(&[2.0, 4.0])).unwrap();
        assert_eq!(inv, Matrix::diag(&[0.5, 0.25]));
        assert!(matches!(
            inverse(&Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]])),
            Err(NumericError::Singular(_))
        ));
        assert!(inverse(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn inverse_of_printed_x1_matches_adjugate() {
        let (a, b, d) = (0.4300, 0.0080, 0.4365);
        let det = a * d - b * b;
        let adj = Matrix::from_rows(&[[d / det, -b / det], [-b / det, a / det]]);
        let inv = inverse(&Matrix::from_rows(&[[a, b], [b, d]])).unwrap();
        assert!((&inv - &adj).max_abs() < 1e-12);
        let printed = Matrix::from_rows(&[[2.3264, -0.0426], [-0.0426, 2.2918]]);
        assert!((&inv - &printed).max_abs() < 1e-3);
    }

    #[test]
    fn gen_eig_max_cases() {
        let i = SymMatrix::identity(3);
        assert!((gen_eig_max(&i, &i).unwrap() - 1.0).abs() < 1e-14);
        assert!((gen_eig_max(&i.scale(2.0), &i).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(
            gen_eig_max(&i, &SymMatrix::zeros(3)),
            Err(NumericError::InvalidComparison)
        );
    }

    #[test]
    fn symmetric_constructor_rejects_asymmetry() {
        assert!(matches!(
            SymMatrix::new(Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]])),
            Err(NumericError::NotSymmetric(_))
        ));
        assert!(SymMatrix::new(Matrix::zeros(0, 0)).is_err());
    }
}
