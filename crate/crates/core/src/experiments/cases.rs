//! Closed-form test problems with separable exact solutions
//! `u(t, x) = a(t) S(x)`, `S(x) = Π_d sin(π x_d)` on the unit interval or square.
//!
//! All four use η = 0.5, κ = t + 1 and T = 1. The Neumann datum and its rate
//! are derived from the exact solution: `g = κ ∇u·ν`, `∂t G = ∇∂t u·ν`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{BoundaryField, Nonlinearity, ScalarField, TimeFunction};
use crate::mesh::Mesh;
use crate::problem::{ProblemSpec, DEFAULT_OMEGA_MIN};

pub const ETA: f64 = 0.5;
pub const FINAL_TIME: f64 = 1.0;
pub const DEFAULT_STEPS: usize = 200;
pub const DEFAULT_ELEMENTS_1D: usize = 200;
pub const DEFAULT_GRID_2D: usize = 40;

pub fn kappa(t: f64) -> f64 {
    t + 1.0
}

type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One manufactured experiment.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub id: u32,
    pub dim: usize,
    /// Time factor `a(t)` of the exact solution and its derivative.
    amplitude: TimeFn,
    amplitude_rate: TimeFn,
    pub exact_h: TimeFunction,
    /// Constant `c` in `p(x) = c S(x)`.
    pub profile_coefficient: f64,
    pub reaction: Nonlinearity,
    pub forcing: ScalarField,
    pub measurement: TimeFunction,
    pub measurement_rate: TimeFunction,
    /// Parity of `m` about T/2 (used for the polynomial fit).
    pub measurement_even: bool,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

fn shape(x: &[f64]) -> f64 {
    x.iter().map(|&xi| (PI * xi).sin()).product()
}

fn shape_grad(x: &[f64]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for d in 0..x.len() {
        g[d] = PI
            * x.iter()
                .enumerate()
                .map(|(k, &xk)| if k == d { (PI * xk).cos() } else { (PI * xk).sin() })
                .product::<f64>();
    }
    g
}

fn shape_laplacian(x: &[f64]) -> f64 {
    -(x.len() as f64) * PI * PI * shape(x)
}

pub fn build_case(id: u32) -> Result<ManufacturedCase> {
    let pi2 = PI * PI;
    let case = match id {
        1 => ManufacturedCase {
            id,
            dim: 1,
            amplitude: Arc::new(|t| (-t).exp()),
            amplitude_rate: Arc::new(|t| -(-t).exp()),
            exact_h: TimeFunction::new(|t| (-t).exp()),
            profile_coefficient: -pi2 / 2.0,
            reaction: Nonlinearity::linear(-1.0),
            forcing: ScalarField::new(move |t, x| pi2 * (t + 1.0) * (-t).exp() * shape(x)),
            measurement: TimeFunction::new(|t| 2.0 / PI * (-t).exp()),
            measurement_rate: TimeFunction::new(|t| -2.0 / PI * (-t).exp()),
            measurement_even: false,
        },
        2 => ManufacturedCase {
            id,
            dim: 1,
            amplitude: Arc::new(|t| (2.0 * PI * t).cos()),
            amplitude_rate: Arc::new(|t| -2.0 * PI * (2.0 * PI * t).sin()),
            exact_h: TimeFunction::new(|t| (2.0 * PI * t).sin()),
            profile_coefficient: -(2.0 * PI + PI * pi2),
            reaction: Nonlinearity::linear(pi2),
            forcing: ScalarField::new(move |t, x| pi2 * t * shape(x) * (2.0 * PI * t).cos()),
            measurement: TimeFunction::new(|t| 2.0 / PI * (2.0 * PI * t).cos()),
            measurement_rate: TimeFunction::new(|t| -4.0 * (2.0 * PI * t).sin()),
            measurement_even: true,
        },
        3 => ManufacturedCase {
            id,
            dim: 2,
            amplitude: Arc::new(|t| (-t).exp()),
            amplitude_rate: Arc::new(|t| -(-t).exp()),
            exact_h: TimeFunction::new(|t| (-t).exp()),
            profile_coefficient: -pi2,
            reaction: Nonlinearity::linear(-1.0),
            // −κΔu contributes 2π²(t+1)e^{−t}S in two dimensions.
            forcing: ScalarField::new(move |t, x| 2.0 * pi2 * (t + 1.0) * (-t).exp() * shape(x)),
            measurement: TimeFunction::new(move |t| 4.0 / pi2 * (-t).exp()),
            measurement_rate: TimeFunction::new(move |t| -4.0 / pi2 * (-t).exp()),
            measurement_even: false,
        },
        4 => ManufacturedCase {
            id,
            dim: 2,
            amplitude: Arc::new(|t| (2.0 * PI * t).cos()),
            amplitude_rate: Arc::new(|t| -2.0 * PI * (2.0 * PI * t).sin()),
            exact_h: TimeFunction::new(|t| (2.0 * PI * t).sin()),
            profile_coefficient: -2.0 * (PI + PI * pi2),
            reaction: Nonlinearity::linear(2.0 * pi2),
            forcing: ScalarField::new(move |t, x| 2.0 * pi2 * t * shape(x) * (2.0 * PI * t).cos()),
            measurement: TimeFunction::new(move |t| 4.0 / pi2 * (2.0 * PI * t).cos()),
            measurement_rate: TimeFunction::new(|t| -8.0 / PI * (2.0 * PI * t).sin()),
            measurement_even: true,
        },
        other => return Err(Error::UnknownCase(other)),
    };
    Ok(case)
}

impl ManufacturedCase {
    pub fn all() -> Vec<ManufacturedCase> {
        (1..=4).map(|id| build_case(id).unwrap()).collect()
    }

    pub fn final_time(&self) -> f64 {
        FINAL_TIME
    }

    pub fn default_steps(&self) -> usize {
        DEFAULT_STEPS
    }

    pub fn default_mesh(&self) -> Mesh {
        match self.dim {
            1 => Mesh::interval(DEFAULT_ELEMENTS_1D).unwrap(),
            _ => Mesh::unit_square(DEFAULT_GRID_2D, DEFAULT_GRID_2D).unwrap(),
        }
    }

    pub fn u(&self, t: f64, x: &[f64]) -> f64 {
        (self.amplitude)(t) * shape(x)
    }

    pub fn u_t(&self, t: f64, x: &[f64]) -> f64 {
        (self.amplitude_rate)(t) * shape(x)
    }

    pub fn grad_u(&self, t: f64, x: &[f64]) -> [f64; 2] {
        let a = (self.amplitude)(t);
        shape_grad(x).map(|g| a * g)
    }

    pub fn grad_u_t(&self, t: f64, x: &[f64]) -> [f64; 2] {
        let a = (self.amplitude_rate)(t);
        shape_grad(x).map(|g| a * g)
    }

    pub fn laplacian_u(&self, t: f64, x: &[f64]) -> f64 {
        (self.amplitude)(t) * shape_laplacian(x)
    }

    pub fn laplacian_u_t(&self, t: f64, x: &[f64]) -> f64 {
        (self.amplitude_rate)(t) * shape_laplacian(x)
    }

    pub fn profile(&self, x: &[f64]) -> f64 {
        self.profile_coefficient * shape(x)
    }

    /// `κ ∇u·ν`.
    pub fn neumann(&self, t: f64, x: &[f64], normal: &[f64]) -> f64 {
        let g = self.grad_u(t, x);
        kappa(t) * normal.iter().zip(g).map(|(n, g)| n * g).sum::<f64>()
    }

    /// `∂t (g/κ) = ∇∂t u·ν`.
    pub fn neumann_rate(&self, t: f64, x: &[f64], normal: &[f64]) -> f64 {
        let g = self.grad_u_t(t, x);
        normal.iter().zip(g).map(|(n, g)| n * g).sum()
    }

    /// Strong-form residual
    /// `∂t u − ∇·(η∇∂t u) − ∇·(κ∇u) − F(u) − p h − f` of the exact pair;
    /// η and κ are constant in space here, so the divergences reduce to
    /// Laplacians.
    pub fn strong_residual(&self, t: f64, x: &[f64]) -> f64 {
        self.u_t(t, x) - ETA * self.laplacian_u_t(t, x) - kappa(t) * self.laplacian_u(t, x)
            - self.reaction.eval(self.u(t, x))
            - self.profile(x) * self.exact_h.eval(t)
            - self.forcing.eval(t, x)
    }

    pub fn problem_spec(&self) -> ProblemSpec {
        let (c1, c2, c3, c4) = (self.clone(), self.clone(), self.clone(), self.clone());
        let coefficient = self.profile_coefficient;
        ProblemSpec {
            eta: ScalarField::constant(ETA),
            kappa: ScalarField::new(|t, _| kappa(t)),
            reaction: self.reaction.clone(),
            source_profile: ScalarField::new(move |_, x| coefficient * shape(x)),
            neumann: BoundaryField::new(move |t, x, n| c1.neumann(t, x, n)),
            neumann_rate: BoundaryField::new(move |t, x, n| c2.neumann_rate(t, x, n)),
            forcing: Some(self.forcing.clone()),
            initial: ScalarField::new(move |_, x| c3.u(0.0, x)),
            measurement: self.measurement.clone(),
            measurement_rate: self.measurement_rate.clone(),
            exact_u: Some(ScalarField::new(move |t, x| c4.u(t, x))),
            exact_h: Some(self.exact_h.clone()),
            final_time: FINAL_TIME,
            omega_min: DEFAULT_OMEGA_MIN,
        }
    }

    /// Volume source for the direct problem reproducing the exact solution:
    /// `f + p h`.
    pub fn direct_source(&self) -> ScalarField {
        let case = self.clone();
        ScalarField::new(move |t, x| case.forcing.eval(t, x) + case.profile(x) * case.exact_h.eval(t))
    }
}
