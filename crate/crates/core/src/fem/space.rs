use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::mesh::{BoundaryTag, Mesh};

use super::element::{cg_local_dim, rt_local_dim};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// Continuous Lagrange elements.
    Cg,
    /// Raviart-Thomas H(div) elements.
    Rt,
}

/// Scalar element, two-component vector (CG), or 2x2 tensor with RT rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValueShape {
    Scalar,
    Vector,
    Tensor,
}

/// A conforming finite-element space with essential-BC constraints.
///
/// Multi-component spaces store component `c` of scalar DOF `i` at
/// `c * n_scalar + i`.
#[derive(Debug, Clone)]
pub struct FunctionSpace {
    pub mesh: Arc<Mesh>,
    pub family: Family,
    pub degree: usize,
    pub shape: ValueShape,
    pub essential: Vec<BoundaryTag>,
    n_scalar: usize,
    n_local: usize,
    cell_dofs: Vec<usize>,
    cell_signs: Vec<f64>,
    constrained: Vec<bool>,
    free_index: Vec<Option<usize>>,
    free_dofs: Vec<usize>,
}

/// Builds a space; `essential` lists the tags on which DOFs are fixed to zero.
pub fn build_space(
    mesh: Arc<Mesh>,
    family: Family,
    degree: usize,
    shape: ValueShape,
    essential: &[BoundaryTag],
) -> Result<FunctionSpace> {
    match (family, degree, shape) {
        (Family::Cg, 1 | 2, ValueShape::Scalar | ValueShape::Vector) => {}
        (Family::Rt, 0 | 1, ValueShape::Scalar | ValueShape::Tensor) => {}
        _ => {
            return Err(Error::invalid(format!(
                "unsupported element {family:?} degree {degree} shape {shape:?}"
            )))
        }
    }
    let (nv, ne, nc) = (mesh.n_vertices(), mesh.n_edges(), mesh.n_cells());
    let (n_scalar, n_local) = match family {
        Family::Cg => (if degree == 1 { nv } else { nv + ne }, cg_local_dim(degree)),
        Family::Rt => ((degree + 1) * ne + 2 * degree * nc, rt_local_dim(degree)),
    };
    let mut cell_dofs = Vec::with_capacity(nc * n_local);
    let mut cell_signs = Vec::with_capacity(nc * n_local);
    for c in 0..nc {
        match family {
            Family::Cg => {
                cell_dofs.extend_from_slice(&mesh.cells[c]);
                if degree == 2 {
                    cell_dofs.extend(mesh.cell_edges[c].iter().map(|&(e, _)| nv + e));
                }
                cell_signs.extend(std::iter::repeat_n(1.0, n_local));
            }
            Family::Rt => {
                for &(e, s) in &mesh.cell_edges[c] {
                    for j in 0..=degree {
                        cell_dofs.push((degree + 1) * e + j);
                        // The first-moment DOF is invariant under reversing both
                        // the normal and the edge parametrization.
                        cell_signs.push(if j == 0 { s } else { 1.0 });
                    }
                }
                if degree == 1 {
                    cell_dofs.push(2 * ne + 2 * c);
                    cell_dofs.push(2 * ne + 2 * c + 1);
                    cell_signs.extend([1.0, 1.0]);
                }
            }
        }
    }
    let ncomp = if shape == ValueShape::Scalar { 1 } else { 2 };
    let n_dofs = ncomp * n_scalar;
    let mut constrained = vec![false; n_dofs];
    for (e, _) in mesh.tagged_edges(essential) {
        let mut local = Vec::new();
        match family {
            Family::Cg => {
                local.extend_from_slice(&mesh.edges[e]);
                if degree == 2 {
                    local.push(nv + e);
                }
            }
            Family::Rt => local.extend((0..=degree).map(|j| (degree + 1) * e + j)),
        }
        for d in local {
            for comp in 0..ncomp {
                constrained[comp * n_scalar + d] = true;
            }
        }
    }
    let mut free_index = vec![None; n_dofs];
    let mut free_dofs = Vec::new();
    for (d, &c) in constrained.iter().enumerate() {
        if !c {
            free_index[d] = Some(free_dofs.len());
            free_dofs.push(d);
        }
    }
    let mut essential = essential.to_vec();
    essential.sort();
    essential.dedup();
    Ok(FunctionSpace {
        mesh,
        family,
        degree,
        shape,
        essential,
        n_scalar,
        n_local,
        cell_dofs,
        cell_signs,
        constrained,
        free_index,
        free_dofs,
    })
}

impl FunctionSpace {
    pub fn n_dofs(&self) -> usize {
        self.n_components() * self.n_scalar
    }

    /// DOFs per component.
    pub fn n_scalar(&self) -> usize {
        self.n_scalar
    }

    pub fn n_components(&self) -> usize {
        if self.shape == ValueShape::Scalar {
            1
        } else {
            2
        }
    }

    /// Local basis size of the scalar element.
    pub fn n_local(&self) -> usize {
        self.n_local
    }

    /// Number of reals in a point value (1 or 2 for CG, 2 or 4 for RT).
    pub fn value_dim(&self) -> usize {
        match self.family {
            Family::Cg => self.n_components(),
            Family::Rt => 2 * self.n_components(),
        }
    }

    /// Global scalar-component DOFs of a cell.
    #[inline]
    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        &self.cell_dofs[cell * self.n_local..(cell + 1) * self.n_local]
    }

    /// Orientation signs matching [`Self::cell_dofs`].
    #[inline]
    pub fn cell_signs(&self, cell: usize) -> &[f64] {
        &self.cell_signs[cell * self.n_local..(cell + 1) * self.n_local]
    }

    pub fn constrained(&self) -> &[bool] {
        &self.constrained
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    /// Position of a DOF in the unconstrained numbering.
    #[inline]
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    pub fn free_index_map(&self) -> &[Option<usize>] {
        &self.free_index
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    /// Scatters unconstrained values into a full coefficient vector.
    pub fn expand_free(&self, free: &[f64]) -> Result<Vec<f64>> {
        check_dim("free coefficient vector", self.n_free(), free.len())?;
        let mut full = vec![0.0; self.n_dofs()];
        for (&d, &v) in self.free_dofs.iter().zip(free) {
            full[d] = v;
        }
        Ok(full)
    }

    /// Gathers the unconstrained entries of a full coefficient vector.
    pub fn restrict_free(&self, full: &[f64]) -> Result<Vec<f64>> {
        check_dim("full coefficient vector", self.n_dofs(), full.len())?;
        Ok(self.free_dofs.iter().map(|&d| full[d]).collect())
    }

    /// Physical location of each scalar Lagrange DOF (vertices, then edge midpoints).
    pub fn dof_sites(&self) -> Vec<[f64; 2]> {
        let mesh = &self.mesh;
        let mut sites = mesh.vertices.clone();
        if self.family == Family::Cg && self.degree == 2 {
            sites.extend((0..mesh.n_edges()).map(|e| mesh.edge_point(e, 0.5)));
        }
        sites
    }

    pub(crate) fn same_mesh(&self, other: &FunctionSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh
    }
}

/// Coefficient vector bound to a space.
#[derive(Debug, Clone)]
pub struct FeFunction {
    pub space: Arc<FunctionSpace>,
    pub coefficients: Vec<f64>,
}

impl FeFunction {
    pub fn zeros(space: Arc<FunctionSpace>) -> Self {
        let n = space.n_dofs();
        FeFunction {
            space,
            coefficients: vec![0.0; n],
        }
    }

    /// Wraps coefficients, zeroing constrained entries is the caller's job; they are checked.
    pub fn new(space: Arc<FunctionSpace>, coefficients: Vec<f64>) -> Result<Self> {
        check_dim("function coefficients", space.n_dofs(), coefficients.len())?;
        Ok(FeFunction { space, coefficients })
    }
}
