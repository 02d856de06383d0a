//! Cholesky factorization with O(n^2) incremental updates.
//!
//! The sequential procedure touches the factorized matrix in two ways:
//! appending one row/column when a new scenario enters the design, and
//! perturbing a single diagonal entry when replications are added at an
//! existing scenario. Both are supported here without refactorizing.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Dyn};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct CholFactor {
    inner: nalgebra::linalg::Cholesky<f64, Dyn>,
}

impl CholFactor {
    /// Factorize `a`; returns `None` if `a` is not numerically positive definite.
    pub fn factor(a: DMatrix<f64>) -> Option<Self> {
        nalgebra::linalg::Cholesky::new(a).map(|inner| CholFactor { inner })
    }

    pub fn n(&self) -> usize {
        self.inner.l_dirty().nrows()
    }

    /// Solve `A x = b` for a vector right-hand side.
    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.inner.solve(b)
    }

    /// Solve `A X = B` for a matrix right-hand side.
    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.inner.solve(b)
    }

    /// Solve `L v = b` in place (forward substitution only).
    pub fn solve_lower_mut(&self, b: &mut DMatrix<f64>) {
        let ok = self.inner.l_dirty().solve_lower_triangular_mut(b);
        debug_assert!(ok, "triangular solve cannot fail with positive diagonal");
    }

    /// Column `i` of `A^{-1}` (solves `A q = e_i`).
    pub fn inverse_column(&self, i: usize) -> DVector<f64> {
        let mut e = DVector::zeros(self.n());
        e[i] = 1.0;
        self.inner.solve_mut(&mut e);
        e
    }

    /// `log det A = 2 sum_i log L_ii`.
    pub fn log_det(&self) -> f64 {
        let l = self.inner.l_dirty();
        let mut s = 0.0;
        for i in 0..l.nrows() {
            s += libm::log(l[(i, i)]);
        }
        2.0 * s
    }

    /// Diagonal of the factor (used to sanity-check incremental updates).
    fn diag_ok(&self) -> bool {
        let l = self.inner.l_dirty();
        (0..l.nrows()).all(|i| {
            let d = l[(i, i)];
            d.is_finite() && d > 0.0
        })
    }

    /// Append one row/column: `cross` holds covariances against the existing
    /// points and `diag` the new diagonal entry. Fails (restoring nothing —
    /// the factor is consumed conceptually, so the caller refactorizes) if
    /// the Schur complement is not positive.
    pub fn append(&mut self, cross: &[f64], diag: f64) -> Result<(), ()> {
        let n = self.n();
        debug_assert_eq!(cross.len(), n);
        let mut col = DVector::zeros(n + 1);
        col.as_mut_slice()[..n].copy_from_slice(cross);
        col[n] = diag;
        let old = self.inner.clone();
        let grown = old.insert_column(n, col);
        if grown.l_dirty().iter().all(|v| v.is_finite()) {
            let cand = CholFactor { inner: grown };
            if cand.diag_ok() {
                *self = cand;
                return Ok(());
            }
        }
        Err(())
    }

    /// Add `delta` (either sign) to diagonal entry `i` of the factorized
    /// matrix. A decrease is a rank-one downdate and may fail if it would
    /// destroy positive definiteness; the factor is left untouched then.
    pub fn bump_diagonal(&mut self, i: usize, delta: f64) -> Result<(), ()> {
        if delta == 0.0 {
            return Ok(());
        }
        let n = self.n();
        debug_assert!(i < n);
        let mut x = DVector::zeros(n);
        x[i] = 1.0;
        let mut cand = self.inner.clone();
        cand.rank_one_update(&x, delta);
        let cand = CholFactor { inner: cand };
        if cand.diag_ok() {
            *self = cand;
            Ok(())
        } else {
            Err(())
        }
    }

    /// The lower-triangular factor with a zeroed upper triangle.
    pub fn l(&self) -> DMatrix<f64> {
        self.inner.l()
    }

    /// Reconstruct the factorized matrix (test/diagnostic use).
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let l = self.inner.l();
        &l * l.transpose()
    }
}

/// Dense symmetric solve used by oracle tests and the exact look-ahead
/// formulas: plain `A^{-1} b` through full factorization.
pub fn dense_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    CholFactor::factor(a.clone()).map(|f| f.solve_vec(b))
}

/// Gram-style helper: builds a matrix from a symmetric generator closure.
pub fn build_symmetric<F: FnMut(usize, usize) -> f64>(n: usize, mut f: F) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = f(i, j);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Collects the entries of `A^{-1}` column `i` for a dense matrix (test helper).
pub fn dense_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().try_inverse()
}

#[allow(unused_imports)]
use crate::CoreError;
