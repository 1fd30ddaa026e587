//! P1 finite elements: quadrature, CSR storage, assembly and the SPD solver.
//!
//! Quadrature per cell is 2-point Gauss in 1D and the edge-midpoint rule in
//! 2D; boundary edges use 2-point Gauss, 1D boundary points are weighted 1.
//! Every load vector's entry sum is therefore the quadrature value of the
//! corresponding integral, which the time stepper relies on.

mod quadrature;
mod solver;
mod space;
mod sparse;

pub use quadrature::QuadratureRule;
pub use solver::{pcg, solve_spd, CgOptions, CgSolution, DEFAULT_REL_TOL};
pub use space::P1Space;
pub use sparse::{dot, norm2, CsrMatrix};

use crate::error::Result;
use crate::field::{BoundaryField, ScalarField};
use crate::mesh::Mesh;

pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    P1Space::new(mesh).mass().clone()
}

pub fn assemble_weighted_stiffness(mesh: &Mesh, coeff: &ScalarField, t: f64) -> Result<CsrMatrix> {
    P1Space::new(mesh).weighted_stiffness(coeff, t, "coefficient")
}

pub fn assemble_domain_load(mesh: &Mesh, density: &ScalarField, t: f64) -> Vec<f64> {
    P1Space::new(mesh).load(density, t)
}

pub fn assemble_boundary_load(mesh: &Mesh, density: &BoundaryField, t: f64) -> Vec<f64> {
    P1Space::new(mesh).boundary_load(density, t)
}

pub fn l2_norm(mesh: &Mesh, v: &[f64]) -> Result<f64> {
    P1Space::new(mesh).l2_norm(v)
}
