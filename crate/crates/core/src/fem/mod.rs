//! Conforming finite elements: CG1/CG2 (scalar or vector) and RT0/RT1 (scalar
//! or tensor rows), quadrature, assembly and interpolation.

mod assemble;
pub mod element;
mod interpolate;
pub mod quadrature;
mod space;
mod tabulate;

pub use assemble::{apply_dirichlet, apply_essential_bc, assemble_matrix, assemble_vector, Coef, FormKind, LameFn, PointFn, VecFn, VectorForm};
pub use interpolate::{interpolate, prolongate, FieldFn, PointEval};
pub use quadrature::{triangle_rule, QuadratureRule};
pub use space::{build_space, FeFunction, Family, FunctionSpace, ValueShape};
pub use tabulate::{tabulate_basis, CellBasis, ElementTable};

/// Default quadrature for an RT_k x CG_m pair: exact to degree `2m + 2`.
pub fn default_rule(m: usize) -> QuadratureRule {
    triangle_rule(2 * m + 2)
}
