//! Small dense symmetric linear algebra.
//!
//! Information matrices here are p x p with p rarely above a few dozen, so
//! everything is plain row-major storage and textbook O(p^3) algorithms:
//!
//! * Cholesky factorization, the canonical positive-definiteness test and
//!   the single source of log-determinants and inverses,
//! * cyclic Jacobi eigenvalue sweeps for nonnegative-definiteness checks,
//! * one-sided Jacobi orthogonalization for numerical row rank.
//!
//! The Cholesky singularity rule is part of the crate contract: a pivot
//! below `1e-12 * max diagonal of the input` means "not positive definite".

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative pivot threshold below which a matrix counts as singular.
pub(crate) const PIVOT_RTOL: f64 = 1e-12;

/// Dense square matrix, row-major.
///
/// Only what the allocation algorithms need: construction, indexed access,
/// and symmetric products. Symmetry is a caller-maintained invariant, not
/// an enforced one; the public types in [`crate::design`] do the enforcing.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S = f64> {
    n: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    /// Zero matrix of order `n`.
    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![S::zero(); n * n] }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    /// Builds from nested rows; every row must have length `rows.len()`.
    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Matrix { n, data })
    }

    /// Rank-one matrix `x x'`.
    pub fn outer(x: &[S]) -> Self {
        let n = x.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = x[i] * x[j];
            }
        }
        m
    }

    /// Matrix order.
    pub fn order(&self) -> usize {
        self.n
    }

    /// Flat row-major view of the entries.
    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    /// Entries as nested rows, for serialization.
    pub fn to_rows(&self) -> Vec<Vec<S>> {
        (0..self.n).map(|i| self.data[i * self.n..(i + 1) * self.n].to_vec()).collect()
    }

    /// `self += c * other`, the accumulation step of a weighted sum.
    pub fn add_scaled(&mut self, c: S, other: &Matrix<S>) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * *b;
        }
    }

    /// Scales every entry by `c`.
    pub fn scale(&mut self, c: S) {
        for a in &mut self.data {
            *a *= c;
        }
    }

    /// Sum of diagonal entries.
    pub fn trace(&self) -> S {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Largest diagonal entry (used by the pivot threshold).
    fn max_diagonal(&self) -> S {
        (0..self.n).map(|i| self[(i, i)]).fold(S::neg_infinity(), S::max)
    }

    /// Largest absolute off-diagonal entry relative to the largest
    /// absolute entry overall; zero for a 1 x 1 matrix.
    pub fn asymmetry(&self) -> S {
        let mut worst = S::zero();
        let mut scale = S::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                scale = scale.max(self[(i, j)].abs());
                if j > i {
                    worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
                }
            }
        }
        if scale > S::zero() {
            worst / scale
        } else {
            S::zero()
        }
    }

    /// Replaces the matrix with `(M + M') / 2`.
    pub fn symmetrize(&mut self) {
        let half = S::from_f64(0.5);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let m = (self[(i, j)] + self[(j, i)]) * half;
                self[(i, j)] = m;
                self[(j, i)] = m;
            }
        }
    }

    /// Quadratic form `x' M x`.
    pub fn quadratic_form(&self, x: &[S]) -> S {
        debug_assert_eq!(x.len(), self.n);
        let mut total = S::zero();
        for i in 0..self.n {
            let mut row = S::zero();
            for j in 0..self.n {
                row += self[(i, j)] * x[j];
            }
            total += x[i] * row;
        }
        total
    }

    /// Matrix-vector product `M x`.
    pub fn mul_vec(&self, x: &[S]) -> Vec<S> {
        debug_assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }

    /// Matrix product `self * other` (no symmetry assumed).
    pub fn mul(&self, other: &Matrix<S>) -> Matrix<S> {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for l in 0..n {
                let a = self[(i, l)];
                if a != S::zero() {
                    for j in 0..n {
                        out[(i, j)] += a * other[(l, j)];
                    }
                }
            }
        }
        out
    }

    /// `trace(self * other)` for a symmetric `other`: the elementwise dot
    /// product, since trace(AB) = sum_ij A_ij B_ij when B = B'.
    pub fn trace_product_sym(&self, other: &Matrix<S>) -> S {
        debug_assert_eq!(self.n, other.n);
        self.data.iter().zip(&other.data).map(|(a, b)| *a * *b).sum()
    }

    /// Attempts the lower Cholesky factorization `M = L L'`.
    ///
    /// Returns `None` when any pivot falls below `1e-12 * max diagonal`,
    /// the crate's definition of a singular information matrix. A matrix
    /// whose largest diagonal entry is not strictly positive is singular
    /// outright.
    pub fn cholesky(&self) -> Option<Cholesky<S>> {
        let n = self.n;
        let max_diag = self.max_diagonal();
        if !(max_diag > S::zero()) {
            return None;
        }
        let threshold = S::from_f64(PIVOT_RTOL) * max_diag;
        let mut l = Matrix::zeros(n);
        for j in 0..n {
            let mut pivot = self[(j, j)];
            for k in 0..j {
                pivot -= l[(j, k)] * l[(j, k)];
            }
            if !(pivot >= threshold) {
                return None;
            }
            let root = pivot.sqrt();
            l[(j, j)] = root;
            for i in (j + 1)..n {
                let mut off = self[(i, j)];
                for k in 0..j {
                    off -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = off / root;
            }
        }
        Some(Cholesky { l })
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
    /// ascending.
    ///
    /// Iterates sweeps until the off-diagonal mass is negligible relative
    /// to the Frobenius norm. Convergence for symmetric input is a
    /// classical guarantee; the sweep cap is pure defensiveness.
    pub fn symmetric_eigenvalues(&self) -> Vec<S> {
        let n = self.n;
        if n == 1 {
            return vec![self[(0, 0)]];
        }
        let mut a = self.clone();
        a.symmetrize();
        let fro: S = a.data.iter().map(|x| *x * *x).sum::<S>().sqrt();
        let tol = S::from_f64(1e-30).max(S::from_f64(1e-14) * fro);
        for _sweep in 0..60 {
            let mut off = S::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[(i, j)].abs();
                }
            }
            if off <= tol {
                break;
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    let apq = a[(i, j)];
                    if apq == S::zero() {
                        continue;
                    }
                    // Classical 2 x 2 symmetric Schur decomposition.
                    let theta = (a[(j, j)] - a[(i, i)]) / (S::from_f64(2.0) * apq);
                    let t = {
                        let s = if theta >= S::zero() { S::one() } else { -S::one() };
                        s / (theta.abs() + (S::one() + theta * theta).sqrt())
                    };
                    let c = S::one() / (S::one() + t * t).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let aik = a[(i, k)];
                        let ajk = a[(j, k)];
                        a[(i, k)] = c * aik - s * ajk;
                        a[(j, k)] = s * aik + c * ajk;
                    }
                    for k in 0..n {
                        let aki = a[(k, i)];
                        let akj = a[(k, j)];
                        a[(k, i)] = c * aki - s * akj;
                        a[(k, j)] = s * aki + c * akj;
                    }
                }
            }
        }
        let mut eig: Vec<S> = (0..n).map(|i| a[(i, i)]).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).expect("eigenvalues of finite input are finite"));
        eig
    }
}

impl<S> std::ops::Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.n + j]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for Matrix<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.n + j]
    }
}

/// Lower Cholesky factor of a positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<S = f64> {
    l: Matrix<S>,
}

impl<S: Scalar> Cholesky<S> {
    /// log det(M) = 2 sum_j log L_jj, stable for determinants of any
    /// magnitude because it never forms the raw product.
    pub fn log_det(&self) -> S {
        let two = S::from_f64(2.0);
        (0..self.l.order()).map(|j| self.l[(j, j)].ln()).sum::<S>() * two
    }

    /// Solves `M y = b` in place via the two triangular systems.
    pub fn solve_in_place(&self, b: &mut [S]) {
        let n = self.l.order();
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let mut v = b[i];
            for k in 0..i {
                v -= self.l[(i, k)] * b[k];
            }
            b[i] = v / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut v = b[i];
            for k in (i + 1)..n {
                v -= self.l[(k, i)] * b[k];
            }
            b[i] = v / self.l[(i, i)];
        }
    }

    /// Full inverse, column by column, symmetrized on exit so downstream
    /// trace identities can rely on exact symmetry.
    pub fn inverse(&self) -> Matrix<S> {
        let n = self.l.order();
        let mut inv = Matrix::zeros(n);
        let mut col = vec![S::zero(); n];
        for j in 0..n {
            col.iter_mut().for_each(|x| *x = S::zero());
            col[j] = S::one();
            self.solve_in_place(&mut col);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv.symmetrize();
        inv
    }
}

/// Numerical row rank of a k x m matrix by one-sided Jacobi
/// orthogonalization.
///
/// Rows are rotated pairwise until mutually orthogonal; the surviving row
/// norms are the singular values. A singular value counts toward the rank
/// when it exceeds `1e-10 * (largest singular value)`.
pub fn row_rank<S: Scalar>(rows: &mut [Vec<S>]) -> usize {
    let k = rows.len();
    if k == 0 {
        return 0;
    }
    let m = rows[0].len();
    debug_assert!(rows.iter().all(|r| r.len() == m));
    let tol = S::from_f64(1e-14);
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..k {
            for j in (i + 1)..k {
                let mut alpha = S::zero();
                let mut beta = S::zero();
                let mut gamma = S::zero();
                for t in 0..m {
                    alpha += rows[i][t] * rows[i][t];
                    beta += rows[j][t] * rows[j][t];
                    gamma += rows[i][t] * rows[j][t];
                }
                let scale = (alpha * beta).sqrt();
                if !(scale > S::zero()) || gamma.abs() <= tol * scale {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (S::from_f64(2.0) * gamma);
                let t = {
                    let s = if zeta >= S::zero() { S::one() } else { -S::one() };
                    s / (zeta.abs() + (S::one() + zeta * zeta).sqrt())
                };
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = c * t;
                for idx in 0..m {
                    let u = rows[i][idx];
                    let v = rows[j][idx];
                    rows[i][idx] = c * u - s * v;
                    rows[j][idx] = s * u + c * v;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<S> = rows
        .iter()
        .map(|r| r.iter().map(|x| *x * *x).sum::<S>().sqrt())
        .collect();
    let sigma_max = norms.iter().cloned().fold(S::zero(), S::max);
    if !(sigma_max > S::zero()) {
        return 0;
    }
    let cutoff = S::from_f64(1e-10) * sigma_max;
    norms.iter().filter(|&&s| s > cutoff).count()
}
