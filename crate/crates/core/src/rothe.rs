//! Backward-Euler (Rothe) time stepping for the inverse and direct problems.
//!
//! At step `i` the amplitude `h_i` is computed explicitly from `u_{i-1}` by
//! integrating the equation over Ω, then one SPD system
//!
//! ```text
//! (M/τ + K_η/τ + K_κ) u_i = h_i b_p + b_F(u_{i-1}) + b_f + b_{η∂tG} + b_g
//!                           + (M/τ + K_η/τ) u_{i-1}
//! ```
//!
//! is solved for `u_i`. Each integral in the formula for `h_i` is the entry
//! sum of the load vector that enters the system, so testing the discrete
//! equation with the constant function gives `𝟙ᵀM(u_i − u_{i−1})/τ = m′_i`
//! up to the linear-solver residual.

use crate::error::{Error, Result};
use crate::fem::{pcg, CgOptions, CsrMatrix, P1Space};
use crate::field::ScalarField;
use crate::mesh::Mesh;
use crate::problem::{ProblemSpec, TimeGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub cg: CgOptions,
    /// Keep `u_i` for every step (needed for max-in-time error norms).
    pub store_all_steps: bool,
    /// Extra snapshot times; the nearest grid node is stored.
    pub snapshot_times: Vec<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            cg: CgOptions::default(),
            store_all_steps: false,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub u: Vec<f64>,
}

/// Running quantities bounded uniformly in τ by the a priori estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyDiagnostics {
    /// Σ ‖δu_i‖² τ.
    pub rate_l2: f64,
    /// Σ ‖∇δu_i‖² τ.
    pub rate_grad: f64,
    /// max_j ‖∇u_j‖².
    pub max_grad: f64,
    /// max_j ‖u_j‖².
    pub max_l2: f64,
    /// Σ |h_i|² τ.
    pub source: f64,
}

impl EnergyDiagnostics {
    /// Σ‖δu_i‖²τ + max_j‖∇u_j‖² + Σ|h_i|²τ.
    pub fn total(&self) -> f64 {
        self.rate_l2 + self.max_grad + self.source
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseResult {
    /// t_1, …, t_n.
    pub times: Vec<f64>,
    /// h_1, …, h_n.
    pub h: Vec<f64>,
    /// The m′ values consumed at t_1, …, t_n.
    pub m_prime: Vec<f64>,
    pub u_final: Vec<f64>,
    /// Always contains step 0 and step n; every step if requested.
    pub snapshots: Vec<Snapshot>,
    /// |𝟙ᵀM(u_i − u_{i−1})/τ − m′_i| per step.
    pub measurement_residuals: Vec<f64>,
    pub energy: EnergyDiagnostics,
    pub cg_iterations: Vec<usize>,
}

impl InverseResult {
    pub fn max_measurement_residual(&self) -> f64 {
        self.measurement_residuals.iter().fold(0.0, |m, &r| m.max(r))
    }

    pub fn snapshot(&self, step: usize) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.step == step)
    }
}

/// `u_0, …, u_n` of the direct problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub cg_iterations: Vec<usize>,
}

/// Load vectors at one time level. Their entry sums are the integrals
/// entering the recovery formula.
#[derive(Debug, Clone)]
struct StepLoads {
    profile: Vec<f64>,
    reaction: Vec<f64>,
    forcing: Option<Vec<f64>>,
    flux_rate: Vec<f64>,
    flux: Vec<f64>,
}

impl StepLoads {
    fn assemble(
        space: &P1Space<'_>,
        spec: &ProblemSpec,
        t: f64,
        u_prev: &[f64],
        forcing: Option<&ScalarField>,
    ) -> Result<Self> {
        Ok(StepLoads {
            profile: space.load(&spec.source_profile, t),
            reaction: space.nonlinear_load(&spec.reaction, u_prev)?,
            forcing: forcing.map(|f| space.load(f, t)),
            flux_rate: space
                .boundary_load_with(|x, n| spec.eta.eval(t, x) * spec.neumann_rate.eval(t, x, n)),
            flux: space.boundary_load(&spec.neumann, t),
        })
    }

    fn recover_h(&self, t: f64, m_prime: f64, omega_min: f64) -> Result<f64> {
        let sum = |v: &[f64]| v.iter().sum::<f64>();
        let omega = sum(&self.profile);
        if !(omega.abs() >= omega_min) {
            return Err(Error::DegenerateProfile { t, omega, omega_min });
        }
        let forcing = self.forcing.as_deref().map_or(0.0, sum);
        Ok((m_prime - sum(&self.flux_rate) - sum(&self.flux) - sum(&self.reaction) - forcing) / omega)
    }
}

/// The linear system of one time step together with the recovered `h_i`.
#[derive(Debug, Clone)]
pub struct StepSystem {
    pub h: f64,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// Assembles step `i` (time `t`) of the inverse scheme from `u_prev = u_{i-1}`.
pub fn assemble_step(
    space: &P1Space<'_>,
    spec: &ProblemSpec,
    tau: f64,
    t: f64,
    u_prev: &[f64],
    m_prime: f64,
) -> Result<StepSystem> {
    space.check_len(u_prev)?;
    let loads = StepLoads::assemble(space, spec, t, u_prev, spec.forcing.as_ref())?;
    let h = loads.recover_h(t, m_prime, spec.omega_min)?;
    build_system(space, spec, tau, t, u_prev, &loads, h)
}

fn build_system(
    space: &P1Space<'_>,
    spec: &ProblemSpec,
    tau: f64,
    t: f64,
    u_prev: &[f64],
    loads: &StepLoads,
    h: f64,
) -> Result<StepSystem> {
    let k_eta = space.weighted_stiffness(&spec.eta, t, "eta")?;
    let k_kappa = space.weighted_stiffness(&spec.kappa, t, "kappa")?;
    let inv_tau = 1.0 / tau;
    let memory = CsrMatrix::linear_combination(&[(inv_tau, space.mass()), (inv_tau, &k_eta)])?;
    let matrix = CsrMatrix::linear_combination(&[
        (inv_tau, space.mass()),
        (inv_tau, &k_eta),
        (1.0, &k_kappa),
    ])?;
    let mut rhs = memory.mul_vec(u_prev);
    for (k, r) in rhs.iter_mut().enumerate() {
        let forcing = loads.forcing.as_ref().map_or(0.0, |f| f[k]);
        *r += h * loads.profile[k] + loads.reaction[k] + forcing + loads.flux_rate[k] + loads.flux[k];
    }
    Ok(StepSystem { h, matrix, rhs })
}

/// `h_i` from `u_{i-1}` and `m′(t_i)`.
pub fn recover_h_step(spec: &ProblemSpec, mesh: &Mesh, u_prev: &[f64], t: f64, m_prime: f64) -> Result<f64> {
    let space = P1Space::new(mesh);
    space.check_len(u_prev)?;
    StepLoads::assemble(&space, spec, t, u_prev, spec.forcing.as_ref())?.recover_h(t, m_prime, spec.omega_min)
}

/// Runs the inverse scheme with `m′` supplied at `t_1, …, t_n`.
pub fn inverse_solve(
    spec: &ProblemSpec,
    mesh: &Mesh,
    grid: &TimeGrid,
    m_prime: &[f64],
    opts: &SolverOptions,
) -> Result<InverseResult> {
    let n = grid.steps();
    if m_prime.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: m_prime.len(),
        });
    }
    let space = P1Space::new(mesh);
    let tau = grid.tau();
    let snapshot_steps = snapshot_steps(grid, &opts.snapshot_times);

    let mut u_prev = space.interpolate(&spec.initial, 0.0);
    let mut result = InverseResult {
        times: Vec::with_capacity(n),
        h: Vec::with_capacity(n),
        m_prime: m_prime.to_vec(),
        u_final: Vec::new(),
        snapshots: vec![Snapshot {
            step: 0,
            time: 0.0,
            u: u_prev.clone(),
        }],
        measurement_residuals: Vec::with_capacity(n),
        energy: EnergyDiagnostics::default(),
        cg_iterations: Vec::with_capacity(n),
    };
    let mut energy = EnergyDiagnostics {
        max_grad: space.laplace().bilinear(&u_prev, &u_prev),
        max_l2: space.mass().bilinear(&u_prev, &u_prev),
        ..Default::default()
    };

    for i in 1..=n {
        let t = grid.time(i);
        let step = (|| {
            let system = assemble_step(&space, spec, tau, t, &u_prev, m_prime[i - 1])?;
            let sol = pcg(&system.matrix, &system.rhs, Some(&u_prev), opts.cg)?;
            Ok::<_, Error>((system.h, sol))
        })()
        .map_err(|e| e.at_step(i))?;
        let (h, sol) = step;
        let u = sol.x;

        let rate: Vec<f64> = u.iter().zip(&u_prev).map(|(a, b)| (a - b) / tau).collect();
        let mass_rate: f64 = space.mass().mul_vec(&rate).iter().sum();
        result.measurement_residuals.push((mass_rate - m_prime[i - 1]).abs());

        energy.rate_l2 += space.mass().bilinear(&rate, &rate) * tau;
        energy.rate_grad += space.laplace().bilinear(&rate, &rate) * tau;
        energy.max_grad = energy.max_grad.max(space.laplace().bilinear(&u, &u));
        energy.max_l2 = energy.max_l2.max(space.mass().bilinear(&u, &u));
        energy.source += h * h * tau;

        result.times.push(t);
        result.h.push(h);
        result.cg_iterations.push(sol.iterations);
        if opts.store_all_steps || i == n || snapshot_steps.contains(&i) {
            result.snapshots.push(Snapshot {
                step: i,
                time: t,
                u: u.clone(),
            });
        }
        u_prev = u;
    }
    result.energy = energy;
    result.u_final = u_prev;
    Ok(result)
}

/// The direct problem: same stepping with `h ≡ 0` and `source` as the only
/// volume forcing (it replaces `spec.forcing`).
pub fn direct_solve(
    spec: &ProblemSpec,
    mesh: &Mesh,
    grid: &TimeGrid,
    source: &ScalarField,
    cg: CgOptions,
) -> Result<Trajectory> {
    let space = P1Space::new(mesh);
    let tau = grid.tau();
    let u0 = space.interpolate(&spec.initial, 0.0);
    let mut traj = Trajectory {
        times: grid.nodes().collect(),
        states: vec![u0],
        cg_iterations: Vec::with_capacity(grid.steps()),
    };
    for i in 1..=grid.steps() {
        let t = grid.time(i);
        let u_prev = traj.states.last().unwrap();
        let (u, iterations) = (|| {
            let loads = StepLoads::assemble(&space, spec, t, u_prev, Some(source))?;
            let system = build_system(&space, spec, tau, t, u_prev, &loads, 0.0)?;
            let sol = pcg(&system.matrix, &system.rhs, Some(u_prev), cg)?;
            Ok::<_, Error>((sol.x, sol.iterations))
        })()
        .map_err(|e| e.at_step(i))?;
        traj.states.push(u);
        traj.cg_iterations.push(iterations);
    }
    Ok(traj)
}

fn snapshot_steps(grid: &TimeGrid, times: &[f64]) -> Vec<usize> {
    times
        .iter()
        .map(|&t| ((t / grid.tau()).round().max(0.0) as usize).min(grid.steps()))
        .collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::field::{BoundaryField, Nonlinearity, TimeFunction};
    use crate::problem::DEFAULT_OMEGA_MIN;

    fn quiet_spec() -> ProblemSpec {
        ProblemSpec {
            eta: ScalarField::constant(0.5),
            kappa: ScalarField::new(|t, _| t + 1.0),
            reaction: Nonlinearity::zero(),
            source_profile: ScalarField::constant(2.0),
            neumann: BoundaryField::zero(),
            neumann_rate: BoundaryField::zero(),
            forcing: None,
            initial: ScalarField::constant(0.0),
            measurement: TimeFunction::new(|_| 0.0),
            measurement_rate: TimeFunction::new(|_| 0.0),
            exact_u: None,
            exact_h: None,
            final_time: 1.0,
            omega_min: DEFAULT_OMEGA_MIN,
        }
    }

    #[test]
    fn recovery_reduces_to_rate_over_omega() {
        let mesh = Mesh::interval(4).unwrap();
        let h = recover_h_step(&quiet_spec(), &mesh, &[0.0; 5], 0.3, 4.0).unwrap();
        assert!((h - 2.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_profile_rejected() {
        let mesh = Mesh::interval(4).unwrap();
        let mut spec = quiet_spec();
        spec.source_profile = ScalarField::new(|_, x| (2.0 * PI * x[0]).cos());
        let err = recover_h_step(&spec, &mesh, &[0.0; 5], 0.3, 1.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateProfile { .. }));
    }

    #[test]
    fn wrong_measurement_length() {
        let mesh = Mesh::interval(4).unwrap();
        let grid = TimeGrid::new(1.0, 3).unwrap();
        let err = inverse_solve(&quiet_spec(), &mesh, &grid, &[0.0; 2], &SolverOptions::default());
        assert!(matches!(err, Err(Error::DimensionMismatch { expected: 3, actual: 2 })));
    }

    #[test]
    fn zero_data_direct_problem_stays_zero() {
        let mesh = Mesh::unit_square(4, 4).unwrap();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let traj = direct_solve(&quiet_spec(), &mesh, &grid, &ScalarField::constant(0.0), CgOptions::default())
            .unwrap();
        assert_eq!(traj.states.len(), 11);
        assert!(traj.states.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn system_matrix_independent_of_previous_state() {
        let mesh = Mesh::interval(8).unwrap();
        let space = P1Space::new(&mesh);
        let mut spec = quiet_spec();
        spec.reaction = Nonlinearity::new(1.0, f64::sin);
        let a: Vec<f64> = (0..9).map(|k| k as f64 * 0.1).collect();
        let b: Vec<f64> = (0..9).map(|k| (k as f64).cos()).collect();
        let sa = assemble_step(&space, &spec, 0.1, 0.5, &a, 1.0).unwrap();
        let sb = assemble_step(&space, &spec, 0.1, 0.5, &b, 1.0).unwrap();
        assert_eq!(sa.matrix, sb.matrix);
        assert_ne!(sa.rhs, sb.rhs);
    }

    #[test]
    fn snapshot_requests_rounded_to_grid() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        assert_eq!(snapshot_steps(&grid, &[0.0, 0.26, 2.0]), vec![0, 3, 10]);
    }

    #[test]
    fn failure_carries_step_index() {
        let mesh = Mesh::interval(4).unwrap();
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let mut spec = quiet_spec();
        spec.kappa = ScalarField::new(|t, _| 0.6 - t);
        let err = inverse_solve(&spec, &mesh, &grid, &[0.0; 4], &SolverOptions::default()).unwrap_err();
        match &err {
            Error::Step { step, .. } => assert_eq!(*step, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(err.root(), Error::CoefficientBound { .. }));
    }
}
