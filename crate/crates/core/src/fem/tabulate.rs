use crate::mesh::CellGeometry;

use super::element::{cg_local_dim, cg_reference, rt_local_dim, rt_reference};
use super::quadrature::QuadratureRule;
use super::space::{Family, FunctionSpace};

/// Reference-cell values of a scalar element at the points of a rule.
#[derive(Debug, Clone)]
pub struct ElementTable {
    pub family: Family,
    pub degree: usize,
    pub n_basis: usize,
    pub rule: QuadratureRule,
    ref_val: Vec<f64>,
    ref_grad: Vec<[f64; 2]>,
    ref_vec: Vec<[f64; 2]>,
    ref_div: Vec<f64>,
}

impl ElementTable {
    pub fn new(family: Family, degree: usize, rule: &QuadratureRule) -> Self {
        let nq = rule.len();
        let (n_basis, mut ref_val, mut ref_grad, mut ref_vec, mut ref_div) = match family {
            Family::Cg => {
                let n = cg_local_dim(degree);
                (n, vec![0.0; nq * n], vec![[0.0; 2]; nq * n], Vec::new(), Vec::new())
            }
            Family::Rt => {
                let n = rt_local_dim(degree);
                (n, Vec::new(), Vec::new(), vec![[0.0; 2]; nq * n], vec![0.0; nq * n])
            }
        };
        for q in 0..nq {
            let xi = rule.xi(q);
            let r = q * n_basis..(q + 1) * n_basis;
            match family {
                Family::Cg => cg_reference(degree, xi, &mut ref_val[r.clone()], &mut ref_grad[r]),
                Family::Rt => rt_reference(degree, xi, &mut ref_vec[r.clone()], &mut ref_div[r]),
            }
        }
        ElementTable {
            family,
            degree,
            n_basis,
            rule: rule.clone(),
            ref_val,
            ref_grad,
            ref_vec,
            ref_div,
        }
    }

    pub fn for_space(space: &FunctionSpace, rule: &QuadratureRule) -> Self {
        Self::new(space.family, space.degree, rule)
    }

    /// Table at explicit barycentric points (weights are zero).
    pub fn at_points(family: Family, degree: usize, points: &[[f64; 3]]) -> Self {
        let rule = QuadratureRule {
            points: points.to_vec(),
            weights: vec![0.0; points.len()],
            degree: 0,
        };
        Self::new(family, degree, &rule)
    }

    pub fn n_points(&self) -> usize {
        self.rule.len()
    }
}

/// Physical basis data of one cell: CG values and gradients, or signed
/// Piola-mapped RT values and divergences. Indexed `[q * n_basis + i]`.
#[derive(Debug, Clone)]
pub struct CellBasis {
    pub n_basis: usize,
    pub n_points: usize,
    pub weights: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub val: Vec<f64>,
    pub grad: Vec<[f64; 2]>,
    pub vec: Vec<[f64; 2]>,
    pub div: Vec<f64>,
}

impl CellBasis {
    pub fn new(table: &ElementTable) -> Self {
        let (nb, nq) = (table.n_basis, table.n_points());
        let (cg, rt) = match table.family {
            Family::Cg => (nq * nb, 0),
            Family::Rt => (0, nq * nb),
        };
        CellBasis {
            n_basis: nb,
            n_points: nq,
            weights: vec![0.0; nq],
            points: vec![[0.0; 2]; nq],
            val: vec![0.0; cg],
            grad: vec![[0.0; 2]; cg],
            vec: vec![[0.0; 2]; rt],
            div: vec![0.0; rt],
        }
    }

    /// Maps the reference table onto a cell. `signs` are the RT orientation signs.
    pub fn fill(&mut self, table: &ElementTable, geom: &CellGeometry, signs: &[f64]) {
        let nb = self.n_basis;
        let absdet = geom.det.abs();
        for q in 0..self.n_points {
            self.weights[q] = table.rule.weights[q] * absdet;
            self.points[q] = geom.map(table.rule.xi(q));
        }
        match table.family {
            Family::Cg => {
                self.val.copy_from_slice(&table.ref_val);
                for (g, r) in self.grad.iter_mut().zip(&table.ref_grad) {
                    *g = geom.grad(*r);
                }
            }
            Family::Rt => {
                for k in 0..self.n_points * nb {
                    let s = signs[k % nb];
                    let v = geom.piola(table.ref_vec[k]);
                    self.vec[k] = [s * v[0], s * v[1]];
                    self.div[k] = s * table.ref_div[k] / geom.det;
                }
            }
        }
    }
}

/// Basis functions of a cell evaluated at the points of `rule`.
pub fn tabulate_basis(space: &FunctionSpace, cell: usize, rule: &QuadratureRule) -> CellBasis {
    let table = ElementTable::for_space(space, rule);
    let mut cb = CellBasis::new(&table);
    cb.fill(&table, &space.mesh.cell_geometry(cell), space.cell_signs(cell));
    cb
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature::{edge_rule, triangle_rule};
    use crate::fem::space::{build_space, ValueShape};
    use crate::mesh::build_rect_mesh;
    use std::sync::Arc;

    #[test]
    fn cg_partition_of_unity() {
        let mesh = Arc::new(build_rect_mesh(0.0, 0.0, 2.0, 1.0, 3, 2).unwrap());
        for m in [1, 2] {
            let s = build_space(mesh.clone(), Family::Cg, m, ValueShape::Scalar, &[]).unwrap();
            for c in 0..mesh.n_cells() {
                let cb = tabulate_basis(&s, c, &triangle_rule(4));
                for q in 0..cb.n_points {
                    let row = &cb.val[q * cb.n_basis..(q + 1) * cb.n_basis];
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-14);
                    let g = &cb.grad[q * cb.n_basis..(q + 1) * cb.n_basis];
                    let gs = g.iter().fold([0.0, 0.0], |a, b| [a[0] + b[0], a[1] + b[1]]);
                    assert!(gs[0].abs() < 1e-12 && gs[1].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rt0_edge_fluxes_and_divergence() {
        let mesh = Arc::new(build_rect_mesh(0.0, 0.0, 1.0, 1.0, 2, 3).unwrap());
        let s = build_space(mesh.clone(), Family::Rt, 0, ValueShape::Scalar, &[]).unwrap();
        let (gx, gw) = edge_rule();
        for c in 0..mesh.n_cells() {
            let geom = mesh.cell_geometry(c);
            let pts: Vec<[f64; 3]> = (0..3)
                .flat_map(|i| {
                    let gx = gx.clone();
                    gx.into_iter().map(move |t| {
                        // Point at parameter t along the global edge direction.
                        (i, t)
                    })
                })
                .map(|(i, t)| {
                    let (e, _) = mesh.cell_edges[c][i];
                    let x = mesh.edge_point(e, t);
                    let xi = geom.pullback(x);
                    [1.0 - xi[0] - xi[1], xi[0], xi[1]]
                })
                .collect();
            let table = ElementTable::at_points(Family::Rt, 0, &pts);
            let mut cb = CellBasis::new(&table);
            cb.fill(&table, &geom, s.cell_signs(c));
            for a in 0..3 {
                for i in 0..3 {
                    let (e, _) = mesh.cell_edges[c][i];
                    let n = mesh.edge_normal(e);
                    let len = mesh.edge_length(e);
                    let mut flux = 0.0;
                    for (k, w) in gw.iter().enumerate() {
                        let v = cb.vec[(3 * i + k) * 3 + a];
                        flux += w * len * (v[0] * n[0] + v[1] * n[1]);
                    }
                    let want = if a == i { 1.0 } else { 0.0 };
                    assert!((flux - want).abs() < 1e-13, "cell {c} basis {a} edge {i}: {flux}");
                }
                let sign = mesh.cell_edges[c][a].1;
                assert!((cb.div[a] - sign / geom.area).abs() < 1e-10);
            }
        }
    }
}
