use crate::error::{check_dim, Error, Result};

use super::{axpy, dot, norm2, CsrMatrix};

/// Stopping controls for [`solve_spd_with`].
#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    /// Relative residual target `‖Ax - b‖ / ‖b‖`.
    pub tol: f64,
    /// Iteration cap; `None` means `20 n`.
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    /// Final true relative residual.
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    solve_spd_with(
        a,
        b,
        CgOptions {
            tol,
            max_iter: Some(max_iter),
        },
    )
    .map(|(x, _)| x)
}

pub fn solve_spd_with(a: &CsrMatrix, b: &[f64], opts: CgOptions) -> Result<(Vec<f64>, CgStats)> {
    check_dim("cg square", a.n_rows, a.n_cols)?;
    check_dim("cg right-hand side", a.n_rows, b.len())?;
    let n = b.len();
    let max_iter = opts.max_iter.unwrap_or(20 * n.max(1));
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, CgStats { iterations: 0, residual: 0.0 }));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let target = opts.tol * bnorm;
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut it = 0;
    loop {
        let rnorm = norm2(&r);
        if rnorm <= target {
            // Guard against drift of the recursive residual.
            a.spmv_into(&x, &mut q);
            for i in 0..n {
                r[i] = b[i] - q[i];
            }
            let true_norm = norm2(&r);
            if true_norm <= target {
                return Ok((
                    x,
                    CgStats {
                        iterations: it,
                        residual: true_norm / bnorm,
                    },
                ));
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
        }
        if it >= max_iter {
            return Err(Error::SolverFailure {
                iterations: it,
                residual: rnorm / bnorm,
            });
        }
        a.spmv_into(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::NotSpd { pivot: it, value: pq });
        }
        let alpha = rz / pq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cholesky_solve, DenseMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_to_csr(a: &DenseMatrix) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..a.n_rows {
            for j in 0..a.n_cols {
                if a[(i, j)] != 0.0 {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        CsrMatrix::from_triplets(a.n_rows, a.n_cols, &t)
    }

    #[test]
    fn identity_returns_rhs() {
        let b = vec![1.0, 2.0, -3.0];
        let x = solve_spd(&CsrMatrix::identity(3), &b, 1e-12, 30).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn zero_rhs_takes_no_iterations() {
        let (x, st) = solve_spd_with(&CsrMatrix::identity(4), &[0.0; 4], CgOptions::default()).unwrap();
        assert_eq!(x, vec![0.0; 4]);
        assert_eq!(st.iterations, 0);
    }

    #[test]
    fn agrees_with_dense_cholesky() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 20;
        let g = DenseMatrix::from_vec(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let mut a = g.t_matmul(&g).unwrap();
        for i in 0..n {
            a[(i, i)] += 1.0;
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = solve_spd(&dense_to_csr(&a), &b, 1e-12, 10 * n).unwrap();
        let y = cholesky_solve(&a, &DenseMatrix::from_vec(n, 1, b.clone()).unwrap()).unwrap();
        for i in 0..n {
            assert!((x[i] - y.data[i]).abs() < 1e-8);
        }
        let r = dense_to_csr(&a).spmv(&x).unwrap();
        let res: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!(res <= 1e-12 * norm2(&b));
    }

    #[test]
    fn non_convergence_reports_residual() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 1e6), (2, 2, 2.0), (0, 1, 0.5), (1, 0, 0.5)]);
        match solve_spd(&a, &[1.0, 1.0, 1.0], 1e-14, 1) {
            Err(Error::SolverFailure { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 0.0);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
