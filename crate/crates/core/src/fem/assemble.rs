//! Assembly of bilinear and linear forms into global CSR matrices and vectors.

use crate::error::{check_dim, Error, Result};
use crate::fields::{stiffness_pow, Lame};
use crate::linalg::CsrMatrix;
use crate::mesh::BoundaryTag;

use super::quadrature::{edge_rule, QuadratureRule};
use super::space::{Family, FunctionSpace, ValueShape};
use super::tabulate::{CellBasis, ElementTable};

/// Scalar field evaluated at `(cell, x)`.
pub type PointFn<'a> = &'a (dyn Fn(usize, [f64; 2]) -> f64 + Sync);
/// Vector field evaluated at `(cell, x)`.
pub type VecFn<'a> = &'a (dyn Fn(usize, [f64; 2]) -> [f64; 2] + Sync);
/// Lamé parameters evaluated at `(cell, x)`.
pub type LameFn<'a> = &'a (dyn Fn(usize, [f64; 2]) -> Lame + Sync);

/// Constant or pointwise coefficient.
#[derive(Clone, Copy)]
pub enum Coef<'a> {
    Const(f64),
    Field(PointFn<'a>),
}

impl Coef<'_> {
    #[inline]
    pub fn at(&self, cell: usize, x: [f64; 2]) -> f64 {
        match self {
            Coef::Const(c) => *c,
            Coef::Field(f) => f(cell, x),
        }
    }
}

/// Bilinear forms `a(u, v)` with `u` from the trial and `v` from the test space.
#[derive(Clone, Copy)]
pub enum FormKind<'a> {
    /// `(c u, v)` on CG spaces (componentwise for vectors).
    Mass(Coef<'a>),
    /// `(c ∇u, ∇v)` on CG spaces.
    Stiffness(Coef<'a>),
    /// `(p ∇u, p ∇v)` on CG spaces.
    WeightedGradMass(Coef<'a>),
    /// `(c σ, τ)` on RT spaces (row-wise for tensors).
    RtMass(Coef<'a>),
    /// `(div σ, div τ)` on RT spaces.
    RtDivDiv,
    /// `(σ, p ∇v)`: RT trial, CG test.
    Mixed(Coef<'a>),
    /// `(p ∇u, τ)`: CG trial, RT test.
    MixedT(Coef<'a>),
    /// `(C ε(u), ε(v))` on vector CG spaces.
    StrainEnergy(LameFn<'a>),
    /// `(C⁻¹ σ, τ)` on tensor RT spaces.
    StressCompliance(LameFn<'a>),
    /// `(u, v)` over boundary edges carrying the given tags, CG only.
    BoundaryMass(&'a [BoundaryTag]),
}

/// Linear forms `ℓ(v)` on a test space.
#[derive(Clone, Copy)]
pub enum VectorForm<'a> {
    /// `(f, v)` on scalar CG.
    DomainLoad(PointFn<'a>),
    /// `(f, v)` on vector CG.
    DomainLoadVec(VecFn<'a>),
    /// `(F, p ∇v)` on scalar CG.
    WeightedGradLoad(VecFn<'a>, Coef<'a>),
    /// `(F, τ)` on scalar RT.
    RtLoad(VecFn<'a>),
    /// `(f, div τ)` on scalar RT.
    DivLoad(PointFn<'a>),
    /// `(f, div τ)` on tensor RT, with `f` acting on the row divergences.
    DivLoadVec(VecFn<'a>),
    /// `⟨g, v⟩` on tagged boundary edges, scalar CG.
    BoundaryLoad(PointFn<'a>, &'a [BoundaryTag]),
    /// `⟨g, v⟩` on tagged boundary edges, vector CG.
    BoundaryLoadVec(VecFn<'a>, &'a [BoundaryTag]),
}

fn require(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("form/space shape mismatch: {what}")))
    }
}

/// Symmetric 2x2 strain of the vector basis function `e_c ⊗ ∇φ`.
#[inline]
fn strain(c: usize, g: [f64; 2]) -> [[f64; 2]; 2] {
    let mut e = [[0.0; 2]; 2];
    e[c][0] += 0.5 * g[0];
    e[c][1] += 0.5 * g[1];
    e[0][c] += 0.5 * g[0];
    e[1][c] += 0.5 * g[1];
    e
}

#[inline]
fn ddot(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// Assembles a form over all cells (or tagged edges) into a matrix of size
/// `test.n_dofs() x trial.n_dofs()`.
pub fn assemble_matrix(test: &FunctionSpace, trial: &FunctionSpace, form: FormKind, rule: &QuadratureRule) -> Result<CsrMatrix> {
    if !test.same_mesh(trial) {
        return Err(Error::invalid("test and trial spaces live on different meshes"));
    }
    let (tf, sf) = (test.family, trial.family);
    let same_shape = test.shape == trial.shape;
    match form {
        FormKind::Mass(_) | FormKind::Stiffness(_) | FormKind::WeightedGradMass(_) | FormKind::BoundaryMass(_) => {
            require(tf == Family::Cg && sf == Family::Cg && same_shape, "expects CG test and trial of equal shape")?
        }
        FormKind::RtMass(_) | FormKind::RtDivDiv => {
            require(tf == Family::Rt && sf == Family::Rt && same_shape, "expects RT test and trial of equal shape")?
        }
        FormKind::Mixed(_) => require(
            tf == Family::Cg && sf == Family::Rt && test.shape == ValueShape::Scalar && trial.shape == ValueShape::Scalar,
            "mixed expects scalar CG test and scalar RT trial",
        )?,
        FormKind::MixedT(_) => require(
            tf == Family::Rt && sf == Family::Cg && test.shape == ValueShape::Scalar && trial.shape == ValueShape::Scalar,
            "transposed mixed expects scalar RT test and scalar CG trial",
        )?,
        FormKind::StrainEnergy(_) => require(
            tf == Family::Cg && sf == Family::Cg && test.shape == ValueShape::Vector && same_shape,
            "strain energy expects vector CG",
        )?,
        FormKind::StressCompliance(_) => require(
            tf == Family::Rt && sf == Family::Rt && test.shape == ValueShape::Tensor && same_shape,
            "stress compliance expects tensor RT",
        )?,
    }
    if let FormKind::BoundaryMass(tags) = form {
        return boundary_mass(test, tags);
    }

    let mesh = &test.mesh;
    let (ta, sa) = (ElementTable::for_space(test, rule), ElementTable::for_space(trial, rule));
    let (mut tb, mut sb) = (CellBasis::new(&ta), CellBasis::new(&sa));
    let (nt, ns) = (test.n_local(), trial.n_local());
    let (ct, cs) = (test.n_components(), trial.n_components());
    let mut local = vec![0.0; ct * nt * cs * ns];
    let ncols = cs * ns;
    let mut trip = Vec::with_capacity(mesh.n_cells() * local.len());
    for cell in 0..mesh.n_cells() {
        let geom = mesh.cell_geometry(cell);
        tb.fill(&ta, &geom, test.cell_signs(cell));
        sb.fill(&sa, &geom, trial.cell_signs(cell));
        local.iter_mut().for_each(|v| *v = 0.0);
        for q in 0..rule.len() {
            let (w, x) = (tb.weights[q], tb.points[q]);
            let tq = q * nt;
            let sq = q * ns;
            match form {
                FormKind::Mass(c) => {
                    let wc = w * c.at(cell, x);
                    for comp in 0..ct {
                        for i in 0..nt {
                            for j in 0..ns {
                                local[(comp * nt + i) * ncols + comp * ns + j] += wc * tb.val[tq + i] * sb.val[sq + j];
                            }
                        }
                    }
                }
                FormKind::Stiffness(c) | FormKind::WeightedGradMass(c) => {
                    let cv = c.at(cell, x);
                    let wc = if matches!(form, FormKind::Stiffness(_)) { w * cv } else { w * cv * cv };
                    for comp in 0..ct {
                        for i in 0..nt {
                            let gi = tb.grad[tq + i];
                            for j in 0..ns {
                                let gj = sb.grad[sq + j];
                                local[(comp * nt + i) * ncols + comp * ns + j] += wc * (gi[0] * gj[0] + gi[1] * gj[1]);
                            }
                        }
                    }
                }
                FormKind::RtMass(c) => {
                    let wc = w * c.at(cell, x);
                    for comp in 0..ct {
                        for i in 0..nt {
                            let vi = tb.vec[tq + i];
                            for j in 0..ns {
                                let vj = sb.vec[sq + j];
                                local[(comp * nt + i) * ncols + comp * ns + j] += wc * (vi[0] * vj[0] + vi[1] * vj[1]);
                            }
                        }
                    }
                }
                FormKind::RtDivDiv => {
                    for comp in 0..ct {
                        for i in 0..nt {
                            for j in 0..ns {
                                local[(comp * nt + i) * ncols + comp * ns + j] += w * tb.div[tq + i] * sb.div[sq + j];
                            }
                        }
                    }
                }
                FormKind::Mixed(c) => {
                    let wc = w * c.at(cell, x);
                    for i in 0..nt {
                        let gi = tb.grad[tq + i];
                        for j in 0..ns {
                            let vj = sb.vec[sq + j];
                            local[i * ncols + j] += wc * (gi[0] * vj[0] + gi[1] * vj[1]);
                        }
                    }
                }
                FormKind::MixedT(c) => {
                    let wc = w * c.at(cell, x);
                    for i in 0..nt {
                        let vi = tb.vec[tq + i];
                        for j in 0..ns {
                            let gj = sb.grad[sq + j];
                            local[i * ncols + j] += wc * gi_dot(vi, gj);
                        }
                    }
                }
                FormKind::StrainEnergy(lame) => {
                    let l = lame(cell, x);
                    for ci in 0..2 {
                        for i in 0..nt {
                            let ei = strain(ci, tb.grad[tq + i]);
                            for cj in 0..2 {
                                for j in 0..ns {
                                    let ej = strain(cj, sb.grad[sq + j]);
                                    let cej = stiffness_pow(&l, 1.0, &ej);
                                    local[(ci * nt + i) * ncols + cj * ns + j] += w * ddot(&cej, &ei);
                                }
                            }
                        }
                    }
                }
                FormKind::StressCompliance(lame) => {
                    let l = lame(cell, x);
                    for ci in 0..2 {
                        for i in 0..nt {
                            let mut ti = [[0.0; 2]; 2];
                            ti[ci] = tb.vec[tq + i];
                            for cj in 0..2 {
                                for j in 0..ns {
                                    let mut sj = [[0.0; 2]; 2];
                                    sj[cj] = sb.vec[sq + j];
                                    let c = stiffness_pow(&l, -1.0, &sj);
                                    local[(ci * nt + i) * ncols + cj * ns + j] += w * ddot(&c, &ti);
                                }
                            }
                        }
                    }
                }
                FormKind::BoundaryMass(_) => unreachable!(),
            }
        }
        let (tdofs, sdofs) = (test.cell_dofs(cell), trial.cell_dofs(cell));
        for a in 0..ct * nt {
            let gi = (a / nt) * test.n_scalar() + tdofs[a % nt];
            for b in 0..ncols {
                let v = local[a * ncols + b];
                if v != 0.0 {
                    let gj = (b / ns) * trial.n_scalar() + sdofs[b % ns];
                    trip.push((gi, gj, v));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(test.n_dofs(), trial.n_dofs(), &trip))
}

#[inline]
fn gi_dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Gauss points on a boundary edge with the owning cell and its basis values there.
fn boundary_points(space: &FunctionSpace, edge: usize) -> (usize, Vec<[f64; 2]>, Vec<f64>, CellBasis) {
    let mesh = &space.mesh;
    let cell = mesh.edge_cells[edge].0;
    let geom = mesh.cell_geometry(cell);
    let (gx, gw) = edge_rule();
    let len = mesh.edge_length(edge);
    let pts: Vec<[f64; 2]> = gx.iter().map(|&s| mesh.edge_point(edge, s)).collect();
    let bary: Vec<[f64; 3]> = pts
        .iter()
        .map(|&x| {
            let xi = geom.pullback(x);
            [1.0 - xi[0] - xi[1], xi[0], xi[1]]
        })
        .collect();
    let table = ElementTable::at_points(space.family, space.degree, &bary);
    let mut cb = CellBasis::new(&table);
    cb.fill(&table, &geom, space.cell_signs(cell));
    let weights = gw.iter().map(|w| w * len).collect();
    (cell, pts, weights, cb)
}

fn boundary_mass(space: &FunctionSpace, tags: &[BoundaryTag]) -> Result<CsrMatrix> {
    let n = space.n_local();
    let nc = space.n_components();
    let mut trip = Vec::new();
    for (e, _) in space.mesh.tagged_edges(tags) {
        let (cell, _, w, cb) = boundary_points(space, e);
        let dofs = space.cell_dofs(cell);
        for q in 0..w.len() {
            for i in 0..n {
                for j in 0..n {
                    let v = w[q] * cb.val[q * n + i] * cb.val[q * n + j];
                    for c in 0..nc {
                        let off = c * space.n_scalar();
                        trip.push((off + dofs[i], off + dofs[j], v));
                    }
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(space.n_dofs(), space.n_dofs(), &trip))
}

/// Assembles a linear form into a vector of length `space.n_dofs()`.
pub fn assemble_vector(space: &FunctionSpace, form: VectorForm, rule: &QuadratureRule) -> Result<Vec<f64>> {
    let (fam, shape) = (space.family, space.shape);
    match form {
        VectorForm::DomainLoad(_) | VectorForm::WeightedGradLoad(..) | VectorForm::BoundaryLoad(..) => {
            require(fam == Family::Cg && shape == ValueShape::Scalar, "expects scalar CG")?
        }
        VectorForm::DomainLoadVec(_) | VectorForm::BoundaryLoadVec(..) => {
            require(fam == Family::Cg && shape == ValueShape::Vector, "expects vector CG")?
        }
        VectorForm::RtLoad(_) | VectorForm::DivLoad(_) => {
            require(fam == Family::Rt && shape == ValueShape::Scalar, "expects scalar RT")?
        }
        VectorForm::DivLoadVec(_) => require(fam == Family::Rt && shape == ValueShape::Tensor, "expects tensor RT")?,
    }
    let mut out = vec![0.0; space.n_dofs()];
    let n = space.n_local();
    let ns = space.n_scalar();
    match form {
        VectorForm::BoundaryLoad(g, tags) => {
            for (e, _) in space.mesh.tagged_edges(tags) {
                let (cell, pts, w, cb) = boundary_points(space, e);
                let dofs = space.cell_dofs(cell);
                for q in 0..w.len() {
                    let gv = g(cell, pts[q]);
                    for i in 0..n {
                        out[dofs[i]] += w[q] * gv * cb.val[q * n + i];
                    }
                }
            }
            return Ok(out);
        }
        VectorForm::BoundaryLoadVec(g, tags) => {
            for (e, _) in space.mesh.tagged_edges(tags) {
                let (cell, pts, w, cb) = boundary_points(space, e);
                let dofs = space.cell_dofs(cell);
                for q in 0..w.len() {
                    let gv = g(cell, pts[q]);
                    for i in 0..n {
                        for c in 0..2 {
                            out[c * ns + dofs[i]] += w[q] * gv[c] * cb.val[q * n + i];
                        }
                    }
                }
            }
            return Ok(out);
        }
        _ => {}
    }
    let mesh = &space.mesh;
    let table = ElementTable::for_space(space, rule);
    let mut cb = CellBasis::new(&table);
    for cell in 0..mesh.n_cells() {
        let geom = mesh.cell_geometry(cell);
        cb.fill(&table, &geom, space.cell_signs(cell));
        let dofs = space.cell_dofs(cell);
        for q in 0..rule.len() {
            let (w, x) = (cb.weights[q], cb.points[q]);
            let r = q * n;
            match form {
                VectorForm::DomainLoad(f) => {
                    let fv = w * f(cell, x);
                    for i in 0..n {
                        out[dofs[i]] += fv * cb.val[r + i];
                    }
                }
                VectorForm::DomainLoadVec(f) => {
                    let fv = f(cell, x);
                    for i in 0..n {
                        for c in 0..2 {
                            out[c * ns + dofs[i]] += w * fv[c] * cb.val[r + i];
                        }
                    }
                }
                VectorForm::WeightedGradLoad(f, p) => {
                    let fv = f(cell, x);
                    let wp = w * p.at(cell, x);
                    for i in 0..n {
                        out[dofs[i]] += wp * gi_dot(fv, cb.grad[r + i]);
                    }
                }
                VectorForm::RtLoad(f) => {
                    let fv = f(cell, x);
                    for i in 0..n {
                        out[dofs[i]] += w * gi_dot(fv, cb.vec[r + i]);
                    }
                }
                VectorForm::DivLoad(f) => {
                    let fv = w * f(cell, x);
                    for i in 0..n {
                        out[dofs[i]] += fv * cb.div[r + i];
                    }
                }
                VectorForm::DivLoadVec(f) => {
                    let fv = f(cell, x);
                    for i in 0..n {
                        for c in 0..2 {
                            out[c * ns + dofs[i]] += w * fv[c] * cb.div[r + i];
                        }
                    }
                }
                VectorForm::BoundaryLoad(..) | VectorForm::BoundaryLoadVec(..) => unreachable!(),
            }
        }
    }
    Ok(out)
}

/// Symmetric elimination of constrained DOFs: their rows and columns become
/// identity rows/columns with zero right-hand side.
pub fn apply_essential_bc(a: &CsrMatrix, b: &[f64], constrained: &[bool]) -> Result<(CsrMatrix, Vec<f64>)> {
    let zeros = vec![0.0; b.len()];
    apply_dirichlet(a, b, constrained, &zeros)
}

/// Like [`apply_essential_bc`] but with prescribed values `g` on the constrained DOFs.
pub fn apply_dirichlet(a: &CsrMatrix, b: &[f64], constrained: &[bool], g: &[f64]) -> Result<(CsrMatrix, Vec<f64>)> {
    check_dim("bc rows", a.n_rows, b.len())?;
    check_dim("bc constrained mask", a.n_rows, constrained.len())?;
    check_dim("bc values", a.n_rows, g.len())?;
    let mut rhs = b.to_vec();
    let mut m = a.clone();
    for i in 0..m.n_rows {
        for k in m.row_ptr[i]..m.row_ptr[i + 1] {
            let j = m.col_idx[k];
            if constrained[i] {
                m.values[k] = if i == j { 1.0 } else { 0.0 };
            } else if constrained[j] {
                rhs[i] -= m.values[k] * g[j];
                m.values[k] = 0.0;
            }
        }
    }
    for i in 0..m.n_rows {
        if constrained[i] {
            if m.find(i, i).is_none() {
                return Err(Error::Internal(format!("constrained row {i} lacks a diagonal entry")));
            }
            rhs[i] = g[i];
        }
    }
    Ok((m, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature::triangle_rule;
    use crate::fem::space::build_space;
    use crate::linalg::solve_spd;
    use crate::mesh::{build_rect_mesh, Mesh};
    use std::sync::Arc;

    /// Space on the single reference triangle (0,0),(1,0),(0,1).
    fn reference_cell_space(family: Family, degree: usize) -> FunctionSpace {
        let single = Mesh {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            cells: vec![[0, 1, 2]],
            edges: vec![[1, 2], [0, 2], [0, 1]],
            cell_edges: vec![[(0, 1.0), (1, -1.0), (2, 1.0)]],
            boundary_facets: vec![],
            edge_cells: vec![(0, None); 3],
            nx: 1,
            ny: 1,
            bounds: [0.0, 0.0, 1.0, 1.0],
        };
        build_space(Arc::new(single), family, degree, ValueShape::Scalar, &[]).unwrap()
    }

    #[test]
    fn cg1_mass_and_stiffness_on_reference_triangle() {
        let s = reference_cell_space(Family::Cg, 1);
        let rule = triangle_rule(2);
        let m = assemble_matrix(&s, &s, FormKind::Mass(Coef::Const(1.0)), &rule).unwrap().to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 / 12.0 } else { 1.0 / 24.0 };
                assert!((m[(i, j)] - want).abs() < 1e-15);
            }
        }
        let k = assemble_matrix(&s, &s, FormKind::Stiffness(Coef::Const(1.0)), &rule).unwrap().to_dense();
        let want = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[(i, j)] - want[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rt0_divdiv_single_cell() {
        let s = reference_cell_space(Family::Rt, 0);
        let a = assemble_matrix(&s, &s, FormKind::RtDivDiv, &triangle_rule(1)).unwrap().to_dense();
        let area = 0.5;
        let signs = [1.0, -1.0, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                // div φ_i = ±1/|T|, integrated over |T|.
                let want = signs[i] * signs[j] / area;
                assert!((a[(i, j)] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn load_vectors() {
        let mesh = Arc::new(build_rect_mesh(0.0, 0.0, 1.0, 1.0, 4, 4).unwrap());
        let s = build_space(mesh, Family::Cg, 1, ValueShape::Scalar, &[]).unwrap();
        let rule = triangle_rule(2);
        let zero = assemble_vector(&s, VectorForm::DomainLoad(&|_, _| 0.0), &rule).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        let one = assemble_vector(&s, VectorForm::DomainLoad(&|_, _| 1.0), &rule).unwrap();
        assert!((one.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let top = [BoundaryTag::Top];
        let g = assemble_vector(&s, VectorForm::BoundaryLoad(&|_, _| 1.0, &top), &rule).unwrap();
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn symmetric_forms_are_symmetric() {
        let mesh = Arc::new(build_rect_mesh(0.0, 0.0, 2.0, 1.0, 4, 3).unwrap());
        let rule = triangle_rule(6);
        let p = |_: usize, x: [f64; 2]| 1.0 + x[0] * x[1];
        let lame = |_: usize, x: [f64; 2]| Lame { mu: 1.0 + x[0], lambda: 2.0 - x[1] };
        for deg in [1, 2] {
            let s = build_space(mesh.clone(), Family::Cg, deg, ValueShape::Vector, &[]).unwrap();
            for f in [FormKind::Mass(Coef::Field(&p)), FormKind::Stiffness(Coef::Field(&p)), FormKind::StrainEnergy(&lame)] {
                let a = assemble_matrix(&s, &s, f, &rule).unwrap();
                assert!(a.max_asymmetry() <= 1e-12 * a.max_abs());
            }
        }
        for deg in [0, 1] {
            let s = build_space(mesh.clone(), Family::Rt, deg, ValueShape::Tensor, &[]).unwrap();
            for f in [FormKind::RtMass(Coef::Field(&p)), FormKind::RtDivDiv, FormKind::StressCompliance(&lame)] {
                let a = assemble_matrix(&s, &s, f, &rule).unwrap();
                assert!(a.max_asymmetry() <= 1e-12 * a.max_abs());
            }
        }
        let rt = build_space(mesh.clone(), Family::Rt, 1, ValueShape::Scalar, &[]).unwrap();
        let cg = build_space(mesh, Family::Cg, 2, ValueShape::Scalar, &[]).unwrap();
        let b = assemble_matrix(&cg, &rt, FormKind::Mixed(Coef::Field(&p)), &rule).unwrap();
        let bt = assemble_matrix(&rt, &cg, FormKind::MixedT(Coef::Field(&p)), &rule).unwrap();
        let diff = b.transpose().add_scaled(-1.0, &bt).unwrap();
        assert!(diff.max_abs() < 1e-14);
        assert!(assemble_matrix(&cg, &cg, FormKind::RtDivDiv, &rule).is_err());
    }

    #[test]
    fn bc_elimination() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)]);
        let (m, b) = apply_essential_bc(&a, &[1.0, 1.0], &[true, true]).unwrap();
        assert_eq!(m.to_dense().data, vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(b, vec![0.0, 0.0]);
        let (m, b) = apply_essential_bc(&a, &[1.0, 2.0], &[false, false]).unwrap();
        assert_eq!(m, a);
        assert_eq!(b, vec![1.0, 2.0]);
    }

    #[test]
    fn poisson_peak_value() {
        // -Δu = 1 with zero boundary values peaks at about 0.0737 in the centre.
        let mesh = Arc::new(build_rect_mesh(0.0, 0.0, 1.0, 1.0, 32, 32).unwrap());
        let s = build_space(mesh, Family::Cg, 2, ValueShape::Scalar, &BoundaryTag::ALL).unwrap();
        let rule = triangle_rule(4);
        let k = assemble_matrix(&s, &s, FormKind::Stiffness(Coef::Const(1.0)), &rule).unwrap();
        let f = assemble_vector(&s, VectorForm::DomainLoad(&|_, _| 1.0), &rule).unwrap();
        let (k, f) = apply_essential_bc(&k, &f, s.constrained()).unwrap();
        let u = solve_spd(&k, &f, 1e-12, 20 * f.len()).unwrap();
        for d in 0..s.n_dofs() {
            if s.is_constrained(d) {
                assert_eq!(u[d], 0.0);
            }
        }
        let centre = s.dof_sites().iter().position(|p| (p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12).unwrap();
        assert!((u[centre] - 0.07367).abs() < 2e-4, "peak {}", u[centre]);
    }
}
