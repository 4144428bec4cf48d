//! Parameter-independent lifts of boundary data and the flux-free source split.

use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::fem::{
    apply_dirichlet, apply_essential_bc, assemble_matrix, assemble_vector, build_space, default_rule, Coef, Family,
    FeFunction, FormKind, FunctionSpace, VectorForm,
};
use crate::linalg::{solve_spd_with, CgOptions, CsrMatrix};
use crate::mesh::BoundaryTag;

/// Boundary data `x -> value` written componentwise into the output slice.
pub type BoundaryFn<'a> = &'a (dyn Fn([f64; 2], &mut [f64]) + Sync);

fn require_cg(space: &FunctionSpace) -> Result<()> {
    if space.family != Family::Cg {
        return Err(Error::invalid("lifts live in CG spaces"));
    }
    Ok(())
}

fn stiffness(space: &FunctionSpace) -> Result<CsrMatrix> {
    assemble_matrix(space, space, FormKind::Stiffness(Coef::Const(1.0)), &default_rule(space.degree))
}

fn solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    solve_spd_with(a, b, CgOptions { tol: 1e-12, max_iter: None }).map(|(x, _)| x)
}

/// Same element as `u_space` without essential constraints.
pub fn unconstrained_twin(u_space: &FunctionSpace) -> Result<Arc<FunctionSpace>> {
    Ok(Arc::new(build_space(u_space.mesh.clone(), u_space.family, u_space.degree, u_space.shape, &[])?))
}

/// Discrete harmonic extension of `u0`: stiffness system with the DOFs
/// constrained in `u_space` pinned to `u0` at their sites and a natural
/// condition elsewhere. The result lives in the unconstrained twin of `u_space`.
pub fn dirichlet_lift(u_space: &FunctionSpace, u0: Option<BoundaryFn>) -> Result<FeFunction> {
    require_cg(u_space)?;
    let full = unconstrained_twin(u_space)?;
    let Some(u0) = u0 else {
        return Ok(FeFunction::zeros(full));
    };
    if !u_space.constrained().iter().any(|&c| c) {
        return Err(Error::invalid("Dirichlet lift needs a nonempty Dirichlet boundary"));
    }
    let (ns, nc) = (u_space.n_scalar(), u_space.n_components());
    let sites = u_space.dof_sites();
    let mut g = vec![0.0; u_space.n_dofs()];
    let mut val = vec![0.0; nc];
    for (d, x) in sites.iter().enumerate() {
        if (0..nc).any(|c| u_space.is_constrained(c * ns + d)) {
            u0(*x, &mut val);
            for c in 0..nc {
                g[c * ns + d] = val[c];
            }
        }
    }
    let k = stiffness(&full)?;
    let (a, b) = apply_dirichlet(&k, &vec![0.0; k.n_rows], u_space.constrained(), &g)?;
    let mut w = solve(&a, &b)?;
    // Pinned values are exact by construction; remove solver roundoff there.
    for (i, &c) in u_space.constrained().iter().enumerate() {
        if c {
            w[i] = g[i];
        }
    }
    FeFunction::new(full, w)
}

/// Solves `(∇q, ∇v) = ⟨g, v⟩_{Γ_N}` over `u_space`.
pub fn neumann_lift(u_space: &Arc<FunctionSpace>, g: Option<BoundaryFn>, neumann: &[BoundaryTag]) -> Result<FeFunction> {
    require_cg(u_space)?;
    let Some(g) = g else {
        return Ok(FeFunction::zeros(u_space.clone()));
    };
    if neumann.is_empty() {
        return Ok(FeFunction::zeros(u_space.clone()));
    }
    let rule = default_rule(u_space.degree);
    let load = if u_space.n_components() == 1 {
        let f = |_: usize, x: [f64; 2]| {
            let mut v = [0.0];
            g(x, &mut v);
            v[0]
        };
        assemble_vector(u_space, VectorForm::BoundaryLoad(&f, neumann), &rule)?
    } else {
        let f = |_: usize, x: [f64; 2]| {
            let mut v = [0.0; 2];
            g(x, &mut v);
            v
        };
        assemble_vector(u_space, VectorForm::BoundaryLoadVec(&f, neumann), &rule)?
    };
    solve_constrained(u_space, &stiffness(u_space)?, &load)
}

fn solve_constrained(space: &Arc<FunctionSpace>, a: &CsrMatrix, b: &[f64]) -> Result<FeFunction> {
    if !space.constrained().iter().any(|&c| c) {
        return Err(Error::invalid("the lift problem needs a nonempty Dirichlet boundary"));
    }
    let (a, b) = apply_essential_bc(a, b, space.constrained())?;
    let mut x = solve(&a, &b)?;
    for (i, &c) in space.constrained().iter().enumerate() {
        if c {
            x[i] = 0.0;
        }
    }
    FeFunction::new(space.clone(), x)
}

/// Riesz lift of a source functional given by its action `load[i] = f(φ_i)`
/// on the basis of `u_space`: solves `(∇r, ∇v) + (r, v) = -f(v)`. The
/// flux-free pair is `f1 = ∇r`, `f2 = -r`, so `(f2, v) - (f1, ∇v) = f(v)`.
pub fn flux_free_decomposition(u_space: &Arc<FunctionSpace>, load: &[f64]) -> Result<FeFunction> {
    require_cg(u_space)?;
    check_dim("source load vector", u_space.n_dofs(), load.len())?;
    let rule = default_rule(u_space.degree);
    let k = stiffness(u_space)?;
    let m = assemble_matrix(u_space, u_space, FormKind::Mass(Coef::Const(1.0)), &rule)?;
    let a = k.add_scaled(1.0, &m)?;
    let rhs: Vec<f64> = load.iter().map(|v| -v).collect();
    if u_space.constrained().iter().any(|&c| c) {
        solve_constrained(u_space, &a, &rhs)
    } else {
        FeFunction::new(u_space.clone(), solve(&a, &rhs)?)
    }
}

/// Dirichlet lift `w` and Neumann lift `q` of one problem configuration.
#[derive(Debug, Clone)]
pub struct LiftData {
    pub w: FeFunction,
    pub q: FeFunction,
}

impl LiftData {
    pub fn compute(
        u_space: &Arc<FunctionSpace>,
        u0: Option<BoundaryFn>,
        g: Option<BoundaryFn>,
        neumann: &[BoundaryTag],
    ) -> Result<Self> {
        Ok(LiftData {
            w: dirichlet_lift(u_space, u0)?,
            q: neumann_lift(u_space, g, neumann)?,
        })
    }
}
