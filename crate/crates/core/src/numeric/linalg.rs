//! Small dense symmetric linear algebra: Cholesky factorization and least
//! squares through the normal equations. Designs here have at most a dozen
//! columns, so simple O(d^3) routines without pivoting are the right tool.

use crate::num::Real;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    /// A Cholesky pivot was not strictly positive, so the matrix is not
    /// numerically positive definite (rank deficiency shows up here too).
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
}

/// Lower triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<F> {
    n: usize,
    /// Row-major lower triangle including the diagonal, zero above it.
    l: Vec<F>,
}

impl<F: Real> Cholesky<F> {
    /// Factor a symmetric matrix given as a row-major `n x n` slice.
    ///
    /// Only the lower triangle of `a` is read.
    pub fn factor(a: &[F], n: usize) -> Result<Self, LinalgError> {
        assert_eq!(a.len(), n * n, "matrix slice length must be n*n");
        let mut l = vec![F::zero(); n * n];
        for j in 0..n {
            let mut diag = a[j * n + j];
            for k in 0..j {
                diag = diag - l[j * n + k] * l[j * n + k];
            }
            if !(diag > F::zero()) || !diag.is_finite() {
                return Err(LinalgError::NotPositiveDefinite {
                    index: j,
                    pivot: diag.to_f64().unwrap_or(f64::NAN),
                });
            }
            let d = diag.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve A x = b by forward then backward substitution.
    pub fn solve(&self, b: &[F]) -> Vec<F> {
        assert_eq!(b.len(), self.n, "right hand side length must match dimension");
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s = s - self.l[i * n + k] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s = s - self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        x
    }

    /// Ratio of the largest to smallest diagonal entry of the factor.
    ///
    /// Its square is a cheap lower bound on the condition number of A, which
    /// is all the ill-conditioning guards need.
    pub fn diag_ratio(&self) -> F {
        let n = self.n;
        let mut lo = self.l[0];
        let mut hi = self.l[0];
        for j in 1..n {
            let d = self.l[j * n + j];
            if d < lo {
                lo = d;
            }
            if d > hi {
                hi = d;
            }
        }
        hi / lo
    }
}

/// Ordinary least squares fit of `y` on the rows of `x` (row-major, `n x d`).
///
/// Forms the normal equations and solves them by Cholesky; a rank deficient
/// design surfaces as [`LinalgError::NotPositiveDefinite`].
pub fn ols<F: Real>(x: &[F], n: usize, d: usize, y: &[F]) -> Result<Vec<F>, LinalgError> {
    assert_eq!(x.len(), n * d, "design slice length must be n*d");
    assert_eq!(y.len(), n, "response length must match row count");
    let mut xtx = vec![F::zero(); d * d];
    let mut xty = vec![F::zero(); d];
    for row in 0..n {
        let r = &x[row * d..(row + 1) * d];
        for i in 0..d {
            xty[i] += r[i] * y[row];
            for j in 0..=i {
                xtx[i * d + j] += r[i] * r[j];
            }
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            xtx[i * d + j] = xtx[j * d + i];
        }
    }
    let chol = Cholesky::factor(&xtx, d)?;
    Ok(chol.solve(&xty))
}
