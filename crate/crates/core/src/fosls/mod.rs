//! First-order system least-squares losses, full-order solves and
//! PDE-compliant error diagnostics.

mod discretization;
mod problem;

use std::f64::consts::{PI, SQRT_2};

use crate::error::{check_dim, Result};
use crate::fem::{prolongate, tabulate_basis, FeFunction};
use crate::fields::{stiffness_pow, Lame, ParamSample, DIM};
use crate::linalg::{dot, solve_spd_direct, CsrMatrix};

pub use discretization::{Discretization, PointContext};
pub use problem::{manufactured_solution, Problem, ProblemConfig, ProblemKind, MEAN_YOUNG};

/// Quadratic form `loss(s) = sᵀWs + 2sᵀα + β` of one parameter instance.
#[derive(Debug, Clone)]
pub struct LossWeights {
    pub w: CsrMatrix,
    pub alpha: Vec<f64>,
    pub beta: f64,
    /// Seed of the parameter sample.
    pub seed: u64,
}

impl LossWeights {
    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn eval(&self, s: &[f64]) -> Result<f64> {
        eval_loss(self, s)
    }

    /// Minimizer of the loss via the normal equations `W s = -α`, with the
    /// relative residual of the solve.
    pub fn minimize(&self) -> Result<(Vec<f64>, f64)> {
        let rhs: Vec<f64> = self.alpha.iter().map(|a| -a).collect();
        solve_spd_direct(&self.w, &rhs, None)
    }
}

/// `sᵀWs + 2sᵀα + β`.
pub fn eval_loss(weights: &LossWeights, s: &[f64]) -> Result<f64> {
    check_dim("loss argument", weights.n(), s.len())?;
    Ok(weights.w.quad_form(s) + 2.0 * dot(s, &weights.alpha) + weights.beta)
}

/// `sᵀ X s` for a symmetric Gram matrix.
pub fn norm_sq(x: &CsrMatrix, s: &[f64]) -> Result<f64> {
    check_dim("norm argument", x.n_rows, s.len())?;
    Ok(x.quad_form(s))
}

/// `‖a - b‖_X`.
pub fn h_norm_error(x: &CsrMatrix, a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim("error operands", a.len(), b.len())?;
    let d: Vec<f64> = a.iter().zip(b).map(|(a, b)| a - b).collect();
    Ok(norm_sq(x, &d)?.max(0.0).sqrt())
}

/// `error / sqrt(loss)`; `+inf` for a zero loss with nonzero error.
pub fn residual_ratio(error: f64, loss: f64) -> f64 {
    if loss > 0.0 {
        error / loss.sqrt()
    } else if error > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Full-order solution in both stacked and function form.
#[derive(Debug, Clone)]
pub struct SolutionPair {
    pub sigma: FeFunction,
    pub u: FeFunction,
    /// Stacked free coefficients `[σ°; u°]`.
    pub coefficients: Vec<f64>,
    pub loss: f64,
    /// Relative residual of the normal equations.
    pub residual: f64,
}

/// Norm-equivalence constants `c ‖s‖_X ≤ ‖B s‖ ≤ C ‖s‖_X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConstants {
    pub lower: f64,
    pub upper: f64,
}

impl StabilityConstants {
    /// Diffusion with `alpha ≤ p ≤ beta` and Poincaré constant `cp`.
    pub fn diffusion(alpha: f64, beta: f64, cp: f64) -> Self {
        let a = beta * (1.0 + cp * cp).sqrt() / alpha;
        let b = (1.0 + cp * cp) / alpha;
        StabilityConstants {
            lower: ((SQRT_2 + a).powi(2) + b * b).powf(-0.5),
            upper: (2.0 + beta * beta).sqrt(),
        }
    }
}

/// Diameter-based Poincaré bound `diam / π`.
pub fn poincare_bound(domain: [f64; 4]) -> f64 {
    ((domain[2] - domain[0]).powi(2) + (domain[3] - domain[1]).powi(2)).sqrt() / PI
}

/// `C^s` of an isotropic stiffness, applied repeatedly at one point.
#[derive(Clone, Copy)]
struct StiffnessPow {
    dev: f64,
    sph: f64,
}

impl StiffnessPow {
    fn new(l: &Lame, s: f64) -> Self {
        StiffnessPow {
            dev: (2.0 * l.mu).powf(s),
            sph: (2.0 * l.mu + DIM * l.lambda).powf(s),
        }
    }

    /// Applies to a row-major 2x2 tensor.
    #[inline]
    fn apply(&self, t: [f64; 4]) -> [f64; 4] {
        let m = 0.5 * (t[0] + t[3]);
        [
            self.dev * (t[0] - m) + self.sph * m,
            self.dev * t[1],
            self.dev * t[2],
            self.dev * (t[3] - m) + self.sph * m,
        ]
    }
}

impl Problem {
    /// Loss weights of one parameter sample.
    pub fn loss_weights(&self, sample: &ParamSample) -> LossWeights {
        self.weights_with(sample, true)
    }

    /// Weights of the same operator with all boundary and source data set to zero.
    pub fn homogeneous_weights(&self, sample: &ParamSample) -> LossWeights {
        self.weights_with(sample, false)
    }

    fn weights_with(&self, sample: &ParamSample, data: bool) -> LossWeights {
        let (w, alpha, beta) = if self.kind().is_elasticity() {
            self.elasticity_weights(sample, data)
        } else {
            self.diffusion_weights(sample, data)
        };
        LossWeights {
            w,
            alpha,
            beta,
            seed: sample.seed,
        }
    }

    fn diffusion_weights(&self, sample: &ParamSample, data: bool) -> (CsrMatrix, Vec<f64>, f64) {
        let mesh = &self.mesh;
        self.disc.assemble(3, |ctx, b, g| {
            let p = sample.coefficient(mesh, ctx.cell, ctx.bary, ctx.x);
            if data {
                let d = self.point_data(ctx.cell, ctx.q);
                g[0] = p * d[0] - d[2] + d[4];
                g[1] = p * d[1] - d[3] + d[5];
                g[2] = -d[6];
            }
            for i in 0..ctx.n_sigma() {
                let (v, div) = ctx.sigma_basis(i);
                let r = ctx.sigma_row(0, i);
                b[3 * r..3 * r + 3].copy_from_slice(&[v[0], v[1], div]);
            }
            for j in 0..ctx.n_u() {
                let (_, gr) = ctx.u_basis(j);
                let r = ctx.u_row(0, j);
                b[3 * r] = -p * gr[0];
                b[3 * r + 1] = -p * gr[1];
            }
        })
    }

    fn elasticity_weights(&self, sample: &ParamSample, data: bool) -> (CsrMatrix, Vec<f64>, f64) {
        let mesh = &self.mesh;
        self.disc.assemble(6, |ctx, b, g| {
            let l = self.lame(sample.coefficient(mesh, ctx.cell, ctx.bary, ctx.x));
            let (half, inv_half) = (StiffnessPow::new(&l, 0.5), StiffnessPow::new(&l, -0.5));
            if data {
                let d = self.point_data(ctx.cell, ctx.q);
                let ew = half.apply([d[0], d[1], d[2], d[3]]);
                let z = inv_half.apply([d[4], d[5], d[6], d[7]]);
                for a in 0..4 {
                    g[a] = ew[a] - z[a];
                }
                g[4] = -d[8];
                g[5] = -d[9];
            }
            elasticity_rows(ctx, b, 6, &inv_half, &half, true);
        })
    }

    /// Gram matrix of the discrete X_h inner product on stacked vectors.
    pub fn gram_xh(&self) -> CsrMatrix {
        if self.kind().is_elasticity() {
            let l = self.lame(MEAN_YOUNG);
            let (half, inv_half) = (StiffnessPow::new(&l, 0.5), StiffnessPow::new(&l, -0.5));
            self.disc
                .assemble(10, |ctx, b, _| elasticity_rows(ctx, b, 10, &inv_half, &half, false))
                .0
        } else {
            self.disc
                .assemble(6, |ctx, b, _| {
                    for i in 0..ctx.n_sigma() {
                        let (v, div) = ctx.sigma_basis(i);
                        let r = ctx.sigma_row(0, i);
                        b[6 * r..6 * r + 3].copy_from_slice(&[v[0], v[1], div]);
                    }
                    for j in 0..ctx.n_u() {
                        let (val, gr) = ctx.u_basis(j);
                        let r = ctx.u_row(0, j);
                        b[6 * r + 3..6 * r + 6].copy_from_slice(&[val, gr[0], gr[1]]);
                    }
                })
                .0
        }
    }

    /// Gram matrix of the plain L² inner product of `(σ, u)`.
    pub fn gram_l2(&self) -> CsrMatrix {
        let nc = self.disc.n_components();
        let dim = 3 * nc;
        self.disc
            .assemble(dim, |ctx, b, _| {
                for c in 0..nc {
                    for i in 0..ctx.n_sigma() {
                        let (v, _) = ctx.sigma_basis(i);
                        let r = ctx.sigma_row(c, i);
                        b[dim * r + 2 * c..dim * r + 2 * c + 2].copy_from_slice(&v);
                    }
                    for j in 0..ctx.n_u() {
                        let (val, _) = ctx.u_basis(j);
                        b[dim * ctx.u_row(c, j) + 2 * nc + c] = val;
                    }
                }
            })
            .0
    }

    /// Assembles and minimizes the loss of one sample.
    pub fn solve(&self, sample: &ParamSample) -> Result<SolutionPair> {
        let weights = self.loss_weights(sample);
        self.solve_weights(&weights)
    }

    pub fn solve_weights(&self, weights: &LossWeights) -> Result<SolutionPair> {
        let rhs: Vec<f64> = weights.alpha.iter().map(|a| -a).collect();
        let (s, residual) = solve_spd_direct(&weights.w, &rhs, Some(self.disc.cholesky_pattern()?))?;
        let loss = weights.eval(&s)?;
        let (sigma, u) = self.disc.split(&s)?;
        Ok(SolutionPair {
            sigma,
            u,
            coefficients: s,
            loss,
            residual,
        })
    }

    /// Transfers a stacked vector to the refined problem `fine`.
    pub fn prolongate_to(&self, s: &[f64], fine: &Problem) -> Result<Vec<f64>> {
        let (sigma, u) = self.disc.split(s)?;
        let sigma = prolongate(&sigma, &fine.disc.sigma)?;
        let u = prolongate(&u, &fine.disc.u)?;
        fine.disc.stack(&sigma, &u)
    }

    /// Norm-equivalence constants where the coefficient law is bounded.
    pub fn stability_constants(&self) -> Option<StabilityConstants> {
        let cp = poincare_bound(self.kind().domain());
        match self.kind() {
            ProblemKind::HeatConduction => Some(StabilityConstants::diffusion(0.1, 10.0, cp)),
            ProblemKind::ManufacturedDiffusion => Some(StabilityConstants::diffusion(1.0, 1.0, cp)),
            _ => None,
        }
    }

    /// Loss by direct quadrature of the residual of the FE functions, used
    /// as an oracle for the assembled weights.
    pub fn direct_loss(&self, sample: &ParamSample, s: &[f64]) -> Result<f64> {
        let (sigma, u) = self.disc.split(s)?;
        let rule = &self.disc.rule;
        let mut total = 0.0;
        for cell in 0..self.mesh.n_cells() {
            let sb = tabulate_basis(&self.disc.sigma, cell, rule);
            let ub = tabulate_basis(&self.disc.u, cell, rule);
            for q in 0..rule.len() {
                let x = sb.points[q];
                let p = sample.coefficient(&self.mesh, cell, rule.points[q], x);
                let se = sigma.eval_basis(cell, &sb, q);
                let ue = u.eval_basis(cell, &ub, q);
                let we = self.lifts.w.eval_basis(cell, &ub, q);
                let qe = self.lifts.q.eval_basis(cell, &ub, q);
                let (f1, f2) = self.source_at(x);
                let r2 = if self.kind().is_elasticity() {
                    let l = self.lame(p);
                    let eps = |g: &[[f64; 2]]| {
                        let o = 0.5 * (g[0][1] + g[1][0]);
                        [[g[0][0], o], [o, g[1][1]]]
                    };
                    let t = |v: &[f64]| [[v[0], v[1]], [v[2], v[3]]];
                    let zt = [[qe.grad[0][0], qe.grad[0][1]], [qe.grad[1][0], qe.grad[1][1]]];
                    let a = stiffness_pow(&l, -0.5, &t(&se.value));
                    let b = stiffness_pow(&l, 0.5, &eps(&ue.grad));
                    let c = stiffness_pow(&l, 0.5, &eps(&we.grad));
                    let d = stiffness_pow(&l, -0.5, &zt);
                    let mut r = 0.0;
                    for i in 0..2 {
                        for j in 0..2 {
                            r += (a[i][j] - b[i][j] - c[i][j] + d[i][j]).powi(2);
                        }
                        r += (se.div[i] + f1[i]).powi(2);
                    }
                    r
                } else {
                    let mut r = 0.0;
                    for i in 0..2 {
                        let flux = p * we.grad[0][i] - qe.grad[0][i] + f1[i];
                        r += (se.value[i] - p * ue.grad[0][i] - flux).powi(2);
                    }
                    r + (se.div[0] + f2).powi(2)
                };
                total += sb.weights[q] * r2;
            }
        }
        Ok(total)
    }
}

/// Residual rows of the elasticity basis. Loss layout (`dim = 6`): tensor
/// residual, then divergence. Gram layout (`dim = 10`): stress part, then
/// divergence, then strain part in separate slots.
fn elasticity_rows(
    ctx: &PointContext,
    b: &mut [f64],
    dim: usize,
    inv_half: &StiffnessPow,
    half: &StiffnessPow,
    loss: bool,
) {
    let (strain_at, sign) = if loss { (0, -1.0) } else { (6, 1.0) };
    for c in 0..2 {
        for i in 0..ctx.n_sigma() {
            let (v, div) = ctx.sigma_basis(i);
            let mut t = [0.0; 4];
            t[2 * c] = v[0];
            t[2 * c + 1] = v[1];
            let r = ctx.sigma_row(c, i) * dim;
            b[r..r + 4].copy_from_slice(&inv_half.apply(t));
            b[r + 4 + c] = div;
        }
        for j in 0..ctx.n_u() {
            let (_, gr) = ctx.u_basis(j);
            let mut e = [0.0; 4];
            e[2 * c] = gr[0];
            e[2 * c + 1] = gr[1];
            let o = 0.5 * (e[1] + e[2]);
            e[1] = o;
            e[2] = o;
            let e = half.apply(e);
            let r = ctx.u_row(c, j) * dim + strain_at;
            for a in 0..4 {
                b[r + a] = sign * e[a];
            }
        }
    }
}
