use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Mat, Side};

use crate::error::{check_dim, Error, Result};

use super::{norm2, CsrMatrix};

/// Fill-reducing symbolic Cholesky analysis of a symmetric sparsity pattern,
/// reusable for every matrix with the same pattern.
#[derive(Debug, Clone)]
pub struct CholeskyPattern {
    symbolic: SymbolicLlt<usize>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl CholeskyPattern {
    /// Analyzes the pattern of a symmetric CSR matrix.
    pub fn analyze(a: &CsrMatrix) -> Result<Self> {
        check_dim("cholesky square", a.n_rows, a.n_cols)?;
        let pattern = SymbolicSparseColMatRef::new_checked(a.n_rows, a.n_cols, &a.row_ptr, None, &a.col_idx);
        let symbolic = SymbolicLlt::try_new(pattern, Side::Lower)
            .map_err(|e| Error::Internal(format!("symbolic factorization failed: {e:?}")))?;
        Ok(CholeskyPattern {
            symbolic,
            row_ptr: a.row_ptr.clone(),
            col_idx: a.col_idx.clone(),
        })
    }

    fn matches(&self, a: &CsrMatrix) -> bool {
        a.row_ptr == self.row_ptr && a.col_idx == self.col_idx
    }
}

/// Sparse Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    llt: Llt<usize, f64>,
    n: usize,
}

impl SparseCholesky {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        Self::with_pattern(a, &CholeskyPattern::analyze(a)?)
    }

    /// Numeric factorization reusing an analysis of the same pattern.
    pub fn with_pattern(a: &CsrMatrix, pattern: &CholeskyPattern) -> Result<Self> {
        if !pattern.matches(a) {
            return Err(Error::invalid("matrix pattern differs from the analyzed one"));
        }
        // A symmetric CSR matrix read as CSC is the same matrix.
        let sym = SymbolicSparseColMatRef::new_checked(a.n_rows, a.n_cols, &a.row_ptr, None, &a.col_idx);
        let mat = SparseColMatRef::new(sym, &a.values);
        let llt = Llt::try_new_with_symbolic(pattern.symbolic.clone(), mat, Side::Lower).map_err(|e| match e {
            faer::sparse::linalg::LltError::Numeric(faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot {
                index,
            }) => Error::NotSpd {
                pivot: index,
                value: f64::NAN,
            },
            other => Error::Internal(format!("cholesky failed: {other:?}")),
        })?;
        Ok(SparseCholesky { llt, n: a.n_rows })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim("cholesky right-hand side", self.n, b.len())?;
        let rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        Ok((0..self.n).map(|i| x[(i, 0)]).collect())
    }
}

/// Solves `A x = b` directly and reports the relative residual.
pub fn solve_spd_direct(a: &CsrMatrix, b: &[f64], pattern: Option<&CholeskyPattern>) -> Result<(Vec<f64>, f64)> {
    let chol = match pattern {
        Some(p) => SparseCholesky::with_pattern(a, p)?,
        None => SparseCholesky::new(a)?,
    };
    let x = chol.solve(b)?;
    let bn = norm2(b);
    let res = if bn > 0.0 {
        let ax = a.spmv(&x)?;
        let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
        norm2(&r) / bn
    } else {
        0.0
    };
    Ok((x, res))
}
