//! Canonical interpolation, point evaluation and prolongation between nested meshes.

use std::sync::Arc;

use crate::error::{Error, Result};

use super::element::{cg_nodes, legendre01};
use super::quadrature::{edge_rule, triangle_rule};
use super::space::{FeFunction, Family, FunctionSpace};
use super::tabulate::{CellBasis, ElementTable};

/// Field sampled at `(x, cell)`; writes `space.value_dim()` reals (tensors row-major).
pub type FieldFn<'a> = &'a dyn Fn([f64; 2], usize, &mut [f64]);

/// Canonical interpolant: nodal values for CG, edge-normal moments against
/// Legendre polynomials (plus interior moments for `k = 1`) for RT.
/// Constrained DOFs are left at zero.
pub fn interpolate(space: &Arc<FunctionSpace>, f: FieldFn) -> FeFunction {
    let mesh = &space.mesh;
    let ns = space.n_scalar();
    let ncomp = space.n_components();
    let mut coef = vec![0.0; space.n_dofs()];
    let mut done = vec![false; ns];
    let mut buf = vec![0.0; space.value_dim()];
    match space.family {
        Family::Cg => {
            let nodes = cg_nodes(space.degree);
            for cell in 0..mesh.n_cells() {
                let geom = mesh.cell_geometry(cell);
                for (i, &d) in space.cell_dofs(cell).iter().enumerate() {
                    if done[d] {
                        continue;
                    }
                    done[d] = true;
                    f(geom.map(nodes[i]), cell, &mut buf);
                    for c in 0..ncomp {
                        coef[c * ns + d] = buf[c];
                    }
                }
            }
        }
        Family::Rt => {
            let k = space.degree;
            let (gx, gw) = edge_rule();
            let rule = triangle_rule(6);
            for cell in 0..mesh.n_cells() {
                for &(e, _) in &mesh.cell_edges[cell] {
                    let d0 = (k + 1) * e;
                    if done[d0] {
                        continue;
                    }
                    done[d0] = true;
                    let n = mesh.edge_normal(e);
                    let len = mesh.edge_length(e);
                    for (s, w) in gx.iter().zip(&gw) {
                        f(mesh.edge_point(e, *s), cell, &mut buf);
                        for c in 0..ncomp {
                            let flux = buf[2 * c] * n[0] + buf[2 * c + 1] * n[1];
                            for j in 0..=k {
                                coef[c * ns + d0 + j] += w * len * flux * legendre01(j, *s);
                            }
                        }
                    }
                }
                if k == 1 {
                    let geom = mesh.cell_geometry(cell);
                    let base = 2 * mesh.n_edges() + 2 * cell;
                    for q in 0..rule.len() {
                        let w = rule.weights[q] * geom.det.abs();
                        f(geom.map(rule.xi(q)), cell, &mut buf);
                        for c in 0..ncomp {
                            for l in 0..2 {
                                let dir = [geom.inv_t[0][l], geom.inv_t[1][l]];
                                coef[c * ns + base + l] += w * (buf[2 * c] * dir[0] + buf[2 * c + 1] * dir[1]);
                            }
                        }
                    }
                }
            }
        }
    }
    for (v, &c) in coef.iter_mut().zip(space.constrained()) {
        if c {
            *v = 0.0;
        }
    }
    FeFunction {
        space: space.clone(),
        coefficients: coef,
    }
}

/// Point values of a function inside a known cell.
pub struct PointEval {
    /// `value_dim` reals.
    pub value: Vec<f64>,
    /// CG only: gradient of each component.
    pub grad: Vec<[f64; 2]>,
    /// RT only: divergence of each row.
    pub div: Vec<f64>,
}

impl FeFunction {
    /// Evaluates at reference coordinates `xi` of `cell`.
    pub fn eval_in_cell(&self, cell: usize, xi: [f64; 2]) -> PointEval {
        let space = &self.space;
        let bary = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
        let table = ElementTable::at_points(space.family, space.degree, &[bary]);
        let mut cb = CellBasis::new(&table);
        cb.fill(&table, &space.mesh.cell_geometry(cell), space.cell_signs(cell));
        self.eval_basis(cell, &cb, 0)
    }

    /// Evaluates using a pre-filled cell basis at its point `q`.
    pub fn eval_basis(&self, cell: usize, cb: &CellBasis, q: usize) -> PointEval {
        let space = &self.space;
        let ns = space.n_scalar();
        let nc = space.n_components();
        let dofs = space.cell_dofs(cell);
        let n = dofs.len();
        let mut out = PointEval {
            value: vec![0.0; space.value_dim()],
            grad: Vec::new(),
            div: Vec::new(),
        };
        match space.family {
            Family::Cg => {
                out.grad = vec![[0.0; 2]; nc];
                for c in 0..nc {
                    for (i, &d) in dofs.iter().enumerate() {
                        let a = self.coefficients[c * ns + d];
                        out.value[c] += a * cb.val[q * n + i];
                        let g = cb.grad[q * n + i];
                        out.grad[c][0] += a * g[0];
                        out.grad[c][1] += a * g[1];
                    }
                }
            }
            Family::Rt => {
                out.div = vec![0.0; nc];
                for c in 0..nc {
                    for (i, &d) in dofs.iter().enumerate() {
                        let a = self.coefficients[c * ns + d];
                        let v = cb.vec[q * n + i];
                        out.value[2 * c] += a * v[0];
                        out.value[2 * c + 1] += a * v[1];
                        out.div[c] += a * cb.div[q * n + i];
                    }
                }
            }
        }
        out
    }

    /// Evaluates at a physical point, locating the containing cell.
    pub fn eval_at(&self, x: [f64; 2]) -> Option<PointEval> {
        let mesh = &self.space.mesh;
        let cell = mesh.locate(x)?;
        Some(self.eval_in_cell(cell, mesh.cell_geometry(cell).pullback(x)))
    }
}

/// Transfers a function to a uniformly refined mesh by interpolation, which is
/// exact because the coarse space is contained in the fine one.
pub fn prolongate(coarse: &FeFunction, fine: &Arc<FunctionSpace>) -> Result<FeFunction> {
    let cs = &coarse.space;
    if cs.family != fine.family || cs.degree != fine.degree || cs.shape != fine.shape {
        return Err(Error::invalid("prolongation needs matching element types"));
    }
    let (cm, fm) = (&cs.mesh, &fine.mesh);
    if cm.bounds != fm.bounds || fm.nx % cm.nx != 0 || fm.ny % cm.ny != 0 || fm.nx / cm.nx != fm.ny / cm.ny {
        return Err(Error::invalid("fine mesh is not a uniform refinement of the coarse mesh"));
    }
    let ratio = fm.nx / cm.nx;
    if !ratio.is_power_of_two() {
        return Err(Error::invalid("refinement ratio must be a power of two for nested triangulations"));
    }
    let field = |x: [f64; 2], fine_cell: usize, out: &mut [f64]| {
        let parent = cm.locate(fm.centroid(fine_cell)).expect("fine cell inside coarse domain");
        let xi = cm.cell_geometry(parent).pullback(x);
        let v = coarse.eval_in_cell(parent, xi);
        out.copy_from_slice(&v.value);
    };
    let mut out = interpolate(fine, &field);
    // Constrained entries were zeroed by interpolate; coarse constraints imply fine ones.
    out.space = fine.clone();
    Ok(out)
}
