//! POD reduced bases in the X_h inner product and reduced loss weights.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_dim, Error, Result};
use crate::fields::ParamSample;
use crate::fosls::{LossWeights, Problem};
use crate::linalg::{dot, sym_eig, Cholesky, CsrMatrix, DenseMatrix};

/// Relative eigenvalue floor below which POD modes are discarded.
pub const EIGEN_FLOOR: f64 = 1e-13;

/// Full-order solutions of `samples`, one column each.
pub fn compute_snapshots(problem: &Problem, samples: &[ParamSample]) -> Result<DenseMatrix> {
    if samples.is_empty() {
        return Err(Error::invalid("no snapshot samples"));
    }
    let cols = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| problem.solve(s).map(|sol| sol.coefficients).map_err(|e| e.for_sample(i)))
        .collect::<Result<Vec<_>>>()?;
    DenseMatrix::from_columns(problem.disc.n_free(), &cols)
}

/// How many POD modes to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankTarget {
    Rank(usize),
    /// Smallest rank whose relative eigenvalue tail is at most this value.
    Tolerance(f64),
}

/// X_h-orthonormal reduced basis, one mode per column.
#[derive(Debug, Clone)]
pub struct PodBasis {
    pub modes: DenseMatrix,
    /// All snapshot-correlation eigenvalues, descending, clipped at zero.
    pub eigenvalues: Vec<f64>,
    pub n_snapshots: usize,
}

/// POD of the snapshot columns of `s` in the inner product `x`.
///
/// Modes are `S v_k / sqrt(N_s λ_k)` for the eigenpairs of `C = SᵀXS / N_s`.
pub fn pod(s: &DenseMatrix, x: &CsrMatrix, target: RankTarget) -> Result<PodBasis> {
    check_dim("snapshot rows", x.n_rows, s.n_rows)?;
    let ns = s.n_cols;
    let mut c = s.t_matmul(&x.mul_dense(s)?)?;
    c.data.iter_mut().for_each(|v| *v /= ns as f64);
    c.symmetrize();
    let eig = sym_eig(&c)?;
    let lambda: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0)).collect();
    if !(lambda[0] > 0.0) {
        return Err(Error::invalid("all snapshots are zero"));
    }
    let admissible = lambda.iter().take_while(|&&l| l > EIGEN_FLOOR * lambda[0]).count();
    let r = match target {
        RankTarget::Rank(r) => {
            if r == 0 || r > admissible {
                return Err(Error::invalid(format!("rank {r} outside 1..={admissible}")));
            }
            r
        }
        RankTarget::Tolerance(tau) => (1..=admissible)
            .find(|&r| pod_tail(&lambda, r).1 <= tau)
            .unwrap_or(admissible),
    };
    let mut v = DenseMatrix::zeros(ns, r);
    for k in 0..r {
        let scale = 1.0 / (ns as f64 * lambda[k]).sqrt();
        for i in 0..ns {
            v[(i, k)] = eig.vectors[(i, k)] * scale;
        }
    }
    Ok(PodBasis {
        modes: s.matmul(&v)?,
        eigenvalues: lambda,
        n_snapshots: ns,
    })
}

/// `(Σ_{k>r} λ_k, relative tail)`.
pub fn pod_tail(lambda: &[f64], r: usize) -> (f64, f64) {
    let total: f64 = lambda.iter().sum();
    let tail: f64 = lambda.iter().skip(r).sum();
    (tail, if total > 0.0 { tail / total } else { 0.0 })
}

impl PodBasis {
    pub fn rank(&self) -> usize {
        self.modes.n_cols
    }

    pub fn n_full(&self) -> usize {
        self.modes.n_rows
    }

    /// Leading `r` modes.
    pub fn truncate(&self, r: usize) -> Result<PodBasis> {
        if r == 0 || r > self.rank() {
            return Err(Error::invalid(format!("rank {r} outside 1..={}", self.rank())));
        }
        Ok(PodBasis {
            modes: self.modes.leading_columns(r),
            eigenvalues: self.eigenvalues.clone(),
            n_snapshots: self.n_snapshots,
        })
    }

    /// `Π_rᵀ X s_h`.
    pub fn project(&self, x: &CsrMatrix, s_h: &[f64]) -> Result<Vec<f64>> {
        self.modes.t_matvec(&x.spmv(s_h)?)
    }

    /// `Π_r s_r`.
    pub fn expand(&self, s_r: &[f64]) -> Result<Vec<f64>> {
        self.modes.matvec(s_r)
    }

    /// Content hash of the mode matrix.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.modes.n_rows as u64).to_le_bytes());
        h.update((self.modes.n_cols as u64).to_le_bytes());
        for v in &self.modes.data {
            h.update(v.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Loss weights restricted to a reduced basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedWeights {
    /// Row-major `r x r`.
    pub w: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub seed: u64,
}

/// `(Π_rᵀ W Π_r, Π_rᵀ α, β)`.
pub fn reduce_weights(weights: &LossWeights, basis: &PodBasis) -> Result<ReducedWeights> {
    check_dim("basis rows", weights.n(), basis.n_full())?;
    let mut w = basis.modes.t_matmul(&weights.w.mul_dense(&basis.modes)?)?;
    w.symmetrize();
    Ok(ReducedWeights {
        w: w.data,
        alpha: basis.modes.t_matvec(&weights.alpha)?,
        beta: weights.beta,
        seed: weights.seed,
    })
}

impl ReducedWeights {
    pub fn rank(&self) -> usize {
        self.alpha.len()
    }

    pub fn matrix(&self) -> DenseMatrix {
        DenseMatrix::from_vec(self.rank(), self.rank(), self.w.clone()).expect("square reduced matrix")
    }

    /// `W_r s`.
    pub fn apply(&self, s: &[f64]) -> Vec<f64> {
        let r = self.rank();
        (0..r).map(|i| dot(&self.w[i * r..(i + 1) * r], s)).collect()
    }

    /// `sᵀW_r s + 2sᵀα_r + β`.
    pub fn eval(&self, s: &[f64]) -> Result<f64> {
        check_dim("reduced loss argument", self.rank(), s.len())?;
        Ok(dot(s, &self.apply(s)) + 2.0 * dot(s, &self.alpha) + self.beta)
    }

    /// Gradient `2 W_r s + 2 α_r`.
    pub fn gradient(&self, s: &[f64]) -> Vec<f64> {
        self.apply(s).iter().zip(&self.alpha).map(|(a, b)| 2.0 * (a + b)).collect()
    }

    /// Weights of the leading `r` modes of the same basis.
    pub fn truncate(&self, r: usize) -> Result<ReducedWeights> {
        let n = self.rank();
        if r == 0 || r > n {
            return Err(Error::invalid(format!("rank {r} outside 1..={n}")));
        }
        Ok(ReducedWeights {
            w: (0..r).flat_map(|i| self.w[i * n..i * n + r].iter().copied()).collect(),
            alpha: self.alpha[..r].to_vec(),
            beta: self.beta,
            seed: self.seed,
        })
    }

    /// Minimizer of the reduced loss, `W_r s = -α_r`.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = self.alpha.iter().map(|a| -a).collect();
        Cholesky::new(&self.matrix())?.solve(&rhs)
    }
}

/// Reduced minimizer of `rw`.
pub fn solve_rb(rw: &ReducedWeights) -> Result<Vec<f64>> {
    rw.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::rng_for;
    use crate::fosls::{ProblemConfig, ProblemKind};
    use crate::linalg::sym_eig;
    use rand::Rng;

    fn heat() -> Problem {
        Problem::new(ProblemConfig::new(ProblemKind::HeatConduction, 16, 0)).unwrap()
    }

    fn snapshots(p: &Problem, n: usize, offset: u64) -> (Vec<ParamSample>, DenseMatrix) {
        let samples: Vec<_> = (0..n as u64).map(|i| p.sample(offset + i).unwrap()).collect();
        let s = compute_snapshots(p, &samples).unwrap();
        (samples, s)
    }

    #[test]
    fn modes_are_orthonormal() {
        let p = heat();
        let x = p.gram_xh();
        let (_, s) = snapshots(&p, 12, 0);
        let b = pod(&s, &x, RankTarget::Rank(12)).unwrap();
        let g = b.modes.t_matmul(&x.mul_dense(&b.modes).unwrap()).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - e).abs() < 1e-8, "{i},{j}: {}", g[(i, j)]);
            }
        }
        assert!(b.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn single_snapshot_basis() {
        let p = heat();
        let x = p.gram_xh();
        let (_, s) = snapshots(&p, 1, 3);
        let b = pod(&s, &x, RankTarget::Rank(1)).unwrap();
        let col = s.column(0);
        let nrm = x.quad_form(&col).sqrt();
        assert!((b.eigenvalues[0] - nrm * nrm).abs() < 1e-10 * nrm * nrm);
        for (a, c) in b.modes.column(0).iter().zip(&col) {
            assert!((a - c / nrm).abs() < 1e-10);
        }
    }

    #[test]
    fn full_rank_reproduces_snapshots_and_projection_is_orthogonal() {
        let p = heat();
        let x = p.gram_xh();
        let (_, s) = snapshots(&p, 8, 10);
        let b = pod(&s, &x, RankTarget::Rank(8)).unwrap();
        for j in 0..8 {
            let col = s.column(j);
            let back = b.expand(&b.project(&x, &col).unwrap()).unwrap();
            let d: Vec<f64> = col.iter().zip(&back).map(|(a, b)| a - b).collect();
            assert!(x.quad_form(&d).sqrt() < 1e-8 * x.quad_form(&col).sqrt());
        }
        let b4 = b.truncate(4).unwrap();
        let mut rng = rng_for(1);
        let v: Vec<f64> = (0..s.n_rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pv = b4.expand(&b4.project(&x, &v).unwrap()).unwrap();
        let ppv = b4.expand(&b4.project(&x, &pv).unwrap()).unwrap();
        let rest: Vec<f64> = v.iter().zip(&pv).map(|(a, b)| a - b).collect();
        assert!(pv.iter().zip(&ppv).all(|(a, b)| (a - b).abs() < 1e-9));
        let (n, np, nr) = (x.quad_form(&v), x.quad_form(&pv), x.quad_form(&rest));
        assert!((n - np - nr).abs() < 1e-9 * n);
        assert!(b4.project(&x, &rest).unwrap().iter().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn tolerance_target_and_tail() {
        let lambda = [4.0, 2.0, 1.0, 1.0];
        assert_eq!(pod_tail(&lambda, 4), (0.0, 0.0));
        assert_eq!(pod_tail(&lambda, 0), (8.0, 1.0));
        assert_eq!(pod_tail(&lambda, 2), (2.0, 0.25));
        let p = heat();
        let x = p.gram_xh();
        let (_, s) = snapshots(&p, 10, 20);
        let b = pod(&s, &x, RankTarget::Tolerance(1e-2)).unwrap();
        let r = b.rank();
        assert!(pod_tail(&b.eigenvalues, r).1 <= 1e-2);
        assert!(r == 1 || pod_tail(&b.eigenvalues, r - 1).1 > 1e-2);
        assert!(pod(&s, &x, RankTarget::Rank(0)).is_err());
        let trace: f64 = b.eigenvalues.iter().sum();
        let c = s.t_matmul(&x.mul_dense(&s).unwrap()).unwrap();
        let tr: f64 = (0..10).map(|i| c[(i, i)]).sum::<f64>() / 10.0;
        assert!((trace - tr).abs() < 1e-10 * tr);
    }

    #[test]
    fn zero_snapshots_rejected() {
        let p = heat();
        let s = DenseMatrix::zeros(p.disc.n_free(), 3);
        assert!(pod(&s, &p.gram_xh(), RankTarget::Rank(1)).is_err());
    }

    #[test]
    fn reduced_loss_matches_full_and_bounds_it() {
        let p = heat();
        let x = p.gram_xh();
        let (_, s) = snapshots(&p, 10, 30);
        let b = pod(&s, &x, RankTarget::Rank(6)).unwrap();
        let c = p.stability_constants().unwrap();
        for i in 0..4 {
            let sample = p.sample(500 + i).unwrap();
            let w = p.loss_weights(&sample);
            let rw = reduce_weights(&w, &b).unwrap();
            let mut rng = rng_for(i);
            let sr: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let full = w.eval(&b.expand(&sr).unwrap()).unwrap();
            assert!((rw.eval(&sr).unwrap() - full).abs() < 1e-10 * full);
            assert_eq!(rw.eval(&[0.0; 6]).unwrap(), w.beta);
            let sol = p.solve_weights(&w).unwrap();
            let opt = solve_rb(&rw).unwrap();
            assert!(rw.eval(&opt).unwrap() >= sol.loss);
            assert!(rw.gradient(&opt).iter().all(|g| g.abs() < 1e-8));
            let ev = sym_eig(&rw.matrix()).unwrap().values;
            assert!(ev[0] <= c.upper * c.upper && *ev.last().unwrap() >= c.lower * c.lower);
        }
    }

    #[test]
    fn truncated_weights_match_truncated_basis() {
        let p = heat();
        let x = p.gram_xh();
        let (_, s) = snapshots(&p, 8, 40);
        let b = pod(&s, &x, RankTarget::Rank(5)).unwrap();
        let w = p.loss_weights(&p.sample(77).unwrap());
        let full = reduce_weights(&w, &b).unwrap();
        let direct = reduce_weights(&w, &b.truncate(3).unwrap()).unwrap();
        let cut = full.truncate(3).unwrap();
        assert!(cut.w.iter().zip(&direct.w).all(|(a, b)| (a - b).abs() < 1e-12 * (1.0 + b.abs())));
        assert_eq!(cut.alpha, direct.alpha);
        assert!(full.truncate(6).is_err() && full.truncate(0).is_err());
    }
}
