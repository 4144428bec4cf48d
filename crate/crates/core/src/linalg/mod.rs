//! Minimal dense and sparse linear algebra.

mod cg;
mod csr;
mod dense;
mod direct;
mod eig;

pub use cg::{solve_spd, solve_spd_with, CgOptions, CgStats};
pub use csr::CsrMatrix;
pub use direct::{solve_spd_direct, CholeskyPattern, SparseCholesky};
pub use dense::{cholesky_solve, lu_solve, Cholesky, DenseMatrix};
pub use eig::{sym_eig, SymEig};

/// Euclidean inner product.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
