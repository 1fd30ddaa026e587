//! Reconstruction of a time-dependent source amplitude `h(t)` in the
//! semilinear pseudo-parabolic problem
//!
//! ```text
//! ∂t u − ∇·(η ∇∂t u) − ∇·(κ ∇u) = F(u) + p(t,x) h(t) [+ f(t,x)]   in (0,T] × Ω
//! κ ∇u · ν = g                                                   on (0,T] × ∂Ω
//! u(0,·) = ũ₀
//! ```
//!
//! from the integral measurement `m(t) = ∫_Ω u(t,x) dx`, using backward
//! Euler in time (with the reaction term lagged one step) and P1 finite
//! elements in space.

pub mod error;
pub mod experiments;
pub mod fem;
pub mod field;
pub mod mesh;
pub mod problem;
pub mod regularization;
pub mod rothe;

pub use error::{Error, Result};
pub use field::{BoundaryField, Nonlinearity, ScalarField, TimeFunction};
pub use mesh::{BoundaryFacet, Mesh};
pub use problem::{ProblemSpec, TimeGrid};
pub use rothe::{direct_solve, inverse_solve, recover_h_step, InverseResult, SolverOptions, Trajectory};
