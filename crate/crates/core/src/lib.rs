//! Variationally correct operator learning for parametric diffusion and
//! linear elasticity.
//!
//! The crate assembles first-order system least-squares (FOSLS) losses on
//! Raviart-Thomas x Lagrange finite elements, builds POD reduced bases in the
//! PDE-compliant inner product, projects the loss onto them, and trains a
//! small network that predicts reduced coefficients by minimizing that loss.

pub mod error;
pub mod fem;
pub mod fields;
pub mod fosls;
pub mod io;
pub mod lifts;
pub mod linalg;
pub mod mesh;
pub mod rbno;
pub mod rom;
pub mod seeds;

pub use error::{Error, Result};
pub use mesh::{build_rect_mesh, BoundaryTag, Mesh};
