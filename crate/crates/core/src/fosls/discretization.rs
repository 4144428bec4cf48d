//! Stacked `[σ free; u free]` layout and assembly of quadratic forms built
//! from pointwise linear residual maps.

use std::sync::{Arc, OnceLock};

use crate::error::{check_dim, Error, Result};
use crate::fem::{default_rule, CellBasis, ElementTable, FeFunction, Family, FunctionSpace, QuadratureRule, ValueShape};
use crate::linalg::{CholeskyPattern, CsrMatrix};

const CONSTRAINED: u32 = u32::MAX;

/// A conforming pair `Σ_h x U_h` with essential constraints eliminated.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub sigma: Arc<FunctionSpace>,
    pub u: Arc<FunctionSpace>,
    pub rule: QuadratureRule,
    sigma_table: ElementTable,
    u_table: ElementTable,
    n_sigma_free: usize,
    n_local: usize,
    /// Stacked free index of each local basis function, cell-major.
    local_map: Vec<u32>,
    pattern: CsrMatrix,
    cholesky: OnceLock<CholeskyPattern>,
}

impl Discretization {
    pub fn new(sigma: Arc<FunctionSpace>, u: Arc<FunctionSpace>) -> Result<Self> {
        if sigma.family != Family::Rt || u.family != Family::Cg {
            return Err(Error::invalid("expected an RT x CG pair"));
        }
        if !Arc::ptr_eq(&sigma.mesh, &u.mesh) {
            return Err(Error::invalid("stress and displacement spaces use different meshes"));
        }
        let tensor = sigma.shape == ValueShape::Tensor;
        if tensor != (u.shape == ValueShape::Vector) {
            return Err(Error::invalid("tensor RT pairs with vector CG, scalar RT with scalar CG"));
        }
        let rule = default_rule(u.degree);
        let sigma_table = ElementTable::for_space(&sigma, &rule);
        let u_table = ElementTable::for_space(&u, &rule);
        let nc = u.n_components();
        let n_local = nc * (sigma.n_local() + u.n_local());
        let n_sigma_free = sigma.n_free();
        let n_free = n_sigma_free + u.n_free();
        if n_free >= CONSTRAINED as usize {
            return Err(Error::invalid("too many degrees of freedom"));
        }
        let n_cells = sigma.mesh.n_cells();
        let mut local_map = Vec::with_capacity(n_cells * n_local);
        for cell in 0..n_cells {
            for c in 0..nc {
                for &d in sigma.cell_dofs(cell) {
                    let g = sigma.free_index(c * sigma.n_scalar() + d);
                    local_map.push(g.map_or(CONSTRAINED, |g| g as u32));
                }
            }
            for c in 0..nc {
                for &d in u.cell_dofs(cell) {
                    let g = u.free_index(c * u.n_scalar() + d);
                    local_map.push(g.map_or(CONSTRAINED, |g| (n_sigma_free + g) as u32));
                }
            }
        }
        let mut rows = vec![Vec::new(); n_free];
        for cell in 0..n_cells {
            let map = &local_map[cell * n_local..(cell + 1) * n_local];
            let active: Vec<usize> = map.iter().filter(|&&g| g != CONSTRAINED).map(|&g| g as usize).collect();
            for &a in &active {
                rows[a].extend_from_slice(&active);
            }
        }
        let pattern = CsrMatrix::from_pattern(n_free, rows);
        Ok(Discretization {
            sigma,
            u,
            rule,
            sigma_table,
            u_table,
            n_sigma_free,
            n_local,
            local_map,
            pattern,
            cholesky: OnceLock::new(),
        })
    }

    /// Length of the stacked coefficient vector.
    pub fn n_free(&self) -> usize {
        self.pattern.n_rows
    }

    pub fn n_sigma_free(&self) -> usize {
        self.n_sigma_free
    }

    /// Total DOFs of both spaces including constrained ones.
    pub fn n_total_dofs(&self) -> usize {
        self.sigma.n_dofs() + self.u.n_dofs()
    }

    pub fn n_components(&self) -> usize {
        self.u.n_components()
    }

    /// Local basis size per cell in stacked order `[σ comps; u comps]`.
    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn n_sigma_local(&self) -> usize {
        self.n_components() * self.sigma.n_local()
    }

    /// Symbolic Cholesky analysis of the stacked pattern, computed once.
    pub fn cholesky_pattern(&self) -> Result<&CholeskyPattern> {
        if let Some(p) = self.cholesky.get() {
            return Ok(p);
        }
        let p = CholeskyPattern::analyze(&self.pattern)?;
        Ok(self.cholesky.get_or_init(|| p))
    }

    pub fn pattern_nnz(&self) -> usize {
        self.pattern.nnz()
    }

    /// Splits a stacked vector into full-length FE functions.
    pub fn split(&self, s: &[f64]) -> Result<(FeFunction, FeFunction)> {
        check_dim("stacked coefficient vector", self.n_free(), s.len())?;
        let (a, b) = s.split_at(self.n_sigma_free);
        Ok((
            FeFunction::new(self.sigma.clone(), self.sigma.expand_free(a)?)?,
            FeFunction::new(self.u.clone(), self.u.expand_free(b)?)?,
        ))
    }

    /// Stacks the free coefficients of two FE functions.
    pub fn stack(&self, sigma: &FeFunction, u: &FeFunction) -> Result<Vec<f64>> {
        let mut s = self.sigma.restrict_free(&sigma.coefficients)?;
        s.extend(self.u.restrict_free(&u.coefficients)?);
        Ok(s)
    }

    /// Assembles `Q(s) = Σ_cells Σ_q w |B_q s - g_q|²` as `(W, α, β)` with
    /// `Q(s) = sᵀWs + 2sᵀα + β`.
    ///
    /// For every cell and quadrature point, `kernel(ctx, b, g)` writes the
    /// residual image of each local basis function into row `a` of `b`
    /// (`n_local x dim`) and the data vector into `g` (`dim`). Rows of
    /// constrained basis functions may be left untouched.
    pub fn assemble<K>(&self, dim: usize, mut kernel: K) -> (CsrMatrix, Vec<f64>, f64)
    where
        K: FnMut(&PointContext, &mut [f64], &mut [f64]),
    {
        let mesh = &self.sigma.mesh;
        let nl = self.n_local;
        let mut w_mat = self.pattern.clone();
        let mut alpha = vec![0.0; self.n_free()];
        let mut beta = 0.0;
        let mut sb = CellBasis::new(&self.sigma_table);
        let mut ub = CellBasis::new(&self.u_table);
        let mut b = vec![0.0; nl * dim];
        let mut g = vec![0.0; dim];
        let mut local = vec![0.0; nl * nl];
        let mut local_alpha = vec![0.0; nl];
        let mut active = Vec::with_capacity(nl);
        for cell in 0..mesh.n_cells() {
            let map = &self.local_map[cell * nl..(cell + 1) * nl];
            active.clear();
            active.extend((0..nl).filter(|&a| map[a] != CONSTRAINED));
            let geom = mesh.cell_geometry(cell);
            sb.fill(&self.sigma_table, &geom, self.sigma.cell_signs(cell));
            ub.fill(&self.u_table, &geom, self.u.cell_signs(cell));
            local.iter_mut().for_each(|v| *v = 0.0);
            local_alpha.iter_mut().for_each(|v| *v = 0.0);
            for q in 0..self.rule.len() {
                b.iter_mut().for_each(|v| *v = 0.0);
                g.iter_mut().for_each(|v| *v = 0.0);
                let ctx = PointContext {
                    cell,
                    q,
                    bary: self.rule.points[q],
                    x: sb.points[q],
                    sigma: &sb,
                    u: &ub,
                    n_components: self.n_components(),
                };
                kernel(&ctx, &mut b, &mut g);
                let w = sb.weights[q];
                beta += w * g.iter().map(|v| v * v).sum::<f64>();
                for (ia, &a) in active.iter().enumerate() {
                    let ba = &b[a * dim..(a + 1) * dim];
                    local_alpha[a] -= w * dot(ba, &g);
                    for &c in &active[ia..] {
                        local[a * nl + c] += w * dot(ba, &b[c * dim..(c + 1) * dim]);
                    }
                }
            }
            for (ia, &a) in active.iter().enumerate() {
                let ga = map[a] as usize;
                alpha[ga] += local_alpha[a];
                for &c in &active[ia..] {
                    let gc = map[c] as usize;
                    let v = local[a * nl + c];
                    let k = w_mat.find(ga, gc).expect("entry in the precomputed pattern");
                    w_mat.values[k] += v;
                    if ga != gc {
                        let k = w_mat.find(gc, ga).expect("entry in the precomputed pattern");
                        w_mat.values[k] += v;
                    } else if a != c {
                        // Two local functions sharing one global DOF cannot happen
                        // for conforming spaces; counted twice if it ever did.
                        w_mat.values[k] += v;
                    }
                }
            }
        }
        (w_mat, alpha, beta)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Everything a residual kernel sees at one quadrature point.
pub struct PointContext<'a> {
    pub cell: usize,
    pub q: usize,
    pub bary: [f64; 3],
    pub x: [f64; 2],
    pub sigma: &'a CellBasis,
    pub u: &'a CellBasis,
    pub n_components: usize,
}

impl PointContext<'_> {
    /// RT basis `i` at this point: (value, divergence).
    #[inline]
    pub fn sigma_basis(&self, i: usize) -> ([f64; 2], f64) {
        let k = self.q * self.sigma.n_basis + i;
        (self.sigma.vec[k], self.sigma.div[k])
    }

    /// CG basis `j` at this point: (value, gradient).
    #[inline]
    pub fn u_basis(&self, j: usize) -> (f64, [f64; 2]) {
        let k = self.q * self.u.n_basis + j;
        (self.u.val[k], self.u.grad[k])
    }

    pub fn n_sigma(&self) -> usize {
        self.sigma.n_basis
    }

    pub fn n_u(&self) -> usize {
        self.u.n_basis
    }

    /// Stacked local row of σ basis `i` of component `c`.
    #[inline]
    pub fn sigma_row(&self, c: usize, i: usize) -> usize {
        c * self.sigma.n_basis + i
    }

    /// Stacked local row of u basis `j` of component `c`.
    #[inline]
    pub fn u_row(&self, c: usize, j: usize) -> usize {
        self.n_components * self.sigma.n_basis + c * self.u.n_basis + j
    }
}
