use crate::error::{check_dim, Error, Result};

use super::DenseMatrix;

/// Eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEig {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, one per column, matching `values`.
    pub vectors: DenseMatrix,
}

/// Cyclic Jacobi eigensolver.
///
/// Sweeps until the off-diagonal Frobenius norm drops below `1e-12 ‖C‖_F`.
/// Each eigenvector is signed so that its largest-magnitude entry is positive.
pub fn sym_eig(c: &DenseMatrix) -> Result<SymEig> {
    check_dim("sym_eig square", c.n_rows, c.n_cols)?;
    let n = c.n_rows;
    let scale = c.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if c.max_asymmetry() > 1e-10 * scale.max(1.0) {
        return Err(Error::invalid("sym_eig input is not symmetric"));
    }
    let mut a = c.clone();
    a.symmetrize();
    let mut v = DenseMatrix::identity(n);
    let norm = a.frobenius();
    let target = 1e-12 * norm;
    let off = |a: &DenseMatrix| -> f64 {
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
    let mut sweeps = 0;
    while off(&a) > target {
        sweeps += 1;
        if sweeps > 100 {
            return Err(Error::SolverFailure {
                iterations: sweeps,
                residual: off(&a) / norm,
            });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[(p, p)], a[(q, q)]);
                // Skip entries already negligible against both diagonals.
                if apq.abs() < 1e-18 * (app.abs() + aqq.abs()) {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = cs * akp - sn * akq;
                    a[(k, q)] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = cs * apk - sn * aqk;
                    a[(q, k)] = sn * apk + cs * aqk;
                }
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = cs * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + cs * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        let mut big = 0.0f64;
        for k in 0..n {
            if v[(k, old)].abs() > big.abs() + 1e-14 {
                big = v[(k, old)];
            }
        }
        let s = if big < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            vectors[(k, new)] = s * v[(k, old)];
        }
    }
    Ok(SymEig { values, vectors })
}
