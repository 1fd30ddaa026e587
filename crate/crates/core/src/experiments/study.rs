use crate::error::{Error, Result};
use crate::experiments::cases::ManufacturedCase;
use crate::fem::{CgOptions, P1Space};
use crate::mesh::Mesh;
use crate::problem::{ProblemSpec, TimeGrid, DEFAULT_OMEGA_MIN};
use crate::regularization::{
    fit_polynomial, generate_noisy, l2_mean, residual_curve, select_from_curve, MeasurementSeries, Parity,
    PolyFit, DEFAULT_SAMPLES, DEFAULT_THRESHOLD_PERCENT,
};
use crate::rothe::{direct_solve, inverse_solve, InverseResult, SolverOptions, Trajectory};

/// Errors below this are treated as round-off; EOCs from them are not reported.
pub const ERROR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// ‖I_h u(t_i) − u_i‖ for i = 1..=n.
    pub u_errors: Vec<f64>,
    /// |h(t_i) − h_i| for i = 1..=n; empty for the direct problem.
    pub h_errors: Vec<f64>,
    pub e_max_u: f64,
    pub e_max_h: f64,
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, &x| m.max(x))
}

fn u_errors(spec: &ProblemSpec, space: &P1Space<'_>, states: &[(f64, &[f64])]) -> Result<Vec<f64>> {
    let exact = spec
        .exact_u
        .as_ref()
        .ok_or_else(|| Error::MissingReference("exact solution u".into()))?;
    states
        .iter()
        .map(|&(t, u)| {
            let diff: Vec<f64> = space.interpolate(exact, t).iter().zip(u).map(|(e, v)| e - v).collect();
            space.l2_norm(&diff)
        })
        .collect()
}

/// Max-in-time errors of an inverse run. Needs every step stored
/// (`SolverOptions::store_all_steps`).
pub fn compute_errors(spec: &ProblemSpec, mesh: &Mesh, grid: &TimeGrid, result: &InverseResult) -> Result<ErrorReport> {
    let exact_h = spec
        .exact_h
        .as_ref()
        .ok_or_else(|| Error::MissingReference("exact source h".into()))?;
    let space = P1Space::new(mesh);
    let states = (1..=grid.steps())
        .map(|i| {
            result
                .snapshot(i)
                .map(|s| (s.time, s.u.as_slice()))
                .ok_or_else(|| Error::MissingReference(format!("solution at step {i} was not stored")))
        })
        .collect::<Result<Vec<_>>>()?;
    let u_errors = u_errors(spec, &space, &states)?;
    let h_errors: Vec<f64> = result
        .times
        .iter()
        .zip(&result.h)
        .map(|(&t, &h)| (exact_h.eval(t) - h).abs())
        .collect();
    Ok(ErrorReport {
        e_max_u: max_of(&u_errors),
        e_max_h: max_of(&h_errors),
        u_errors,
        h_errors,
    })
}

pub fn trajectory_errors(spec: &ProblemSpec, mesh: &Mesh, traj: &Trajectory) -> Result<ErrorReport> {
    let space = P1Space::new(mesh);
    let states: Vec<(f64, &[f64])> = traj
        .times
        .iter()
        .zip(&traj.states)
        .skip(1)
        .map(|(&t, u)| (t, u.as_slice()))
        .collect();
    let u_errors = u_errors(spec, &space, &states)?;
    Ok(ErrorReport {
        e_max_u: max_of(&u_errors),
        e_max_h: 0.0,
        u_errors,
        h_errors: Vec::new(),
    })
}

/// Experimental order of convergence between two refinement levels, or
/// `None` when either error is at the round-off floor.
pub fn eoc(e_coarse: f64, e_fine: f64, tau_coarse: f64, tau_fine: f64) -> Option<f64> {
    if e_coarse <= ERROR_FLOOR || e_fine <= ERROR_FLOOR {
        return None;
    }
    Some((e_coarse / e_fine).ln() / (tau_coarse / tau_fine).ln())
}

/// Solver settings shared by the experiment drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    pub cg: CgOptions,
    pub omega_min: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            cg: CgOptions::default(),
            omega_min: DEFAULT_OMEGA_MIN,
        }
    }
}

impl ManufacturedCase {
    pub fn spec_with(&self, opts: &StudyOptions) -> ProblemSpec {
        let mut spec = self.problem_spec();
        spec.omega_min = opts.omega_min;
        spec
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub tau: f64,
    pub steps: usize,
    pub e_max_u: f64,
    pub e_max_h: f64,
    pub eoc_u: Option<f64>,
    pub eoc_h: Option<f64>,
    pub max_measurement_residual: f64,
}

/// Noise-free inverse runs over a strictly decreasing list of time steps on
/// a fixed mesh.
pub fn convergence_study(case: &ManufacturedCase, taus: &[f64], mesh: &Mesh, opts: StudyOptions) -> Result<Vec<ConvergenceRow>> {
    if taus.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 time steps, got {}", taus.len())));
    }
    if taus.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("time steps must be strictly decreasing".into()));
    }
    let grids = taus
        .iter()
        .map(|&tau| TimeGrid::with_step(case.final_time(), tau))
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(taus.len());
    for grid in grids {
        let run = run_inverse(case, mesh, &grid, &MeasurementSource::Exact, opts)?;
        let mut row = ConvergenceRow {
            tau: grid.tau(),
            steps: grid.steps(),
            e_max_u: run.errors.e_max_u,
            e_max_h: run.errors.e_max_h,
            eoc_u: None,
            eoc_h: None,
            max_measurement_residual: run.result.max_measurement_residual(),
        };
        if let Some(prev) = rows.last() {
            row.eoc_u = eoc(prev.e_max_u, row.e_max_u, prev.tau, row.tau);
            row.eoc_h = eoc(prev.e_max_h, row.e_max_h, prev.tau, row.tau);
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DegreeChoice {
    Fixed(usize),
    Auto { max_degree: usize, threshold_percent: f64 },
}

impl Default for DegreeChoice {
    fn default() -> Self {
        DegreeChoice::Auto {
            max_degree: 10,
            threshold_percent: DEFAULT_THRESHOLD_PERCENT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSettings {
    pub epsilon: f64,
    pub seed: u64,
    pub samples: usize,
    pub degree: DegreeChoice,
    pub parity: Parity,
}

impl NoiseSettings {
    pub fn new(epsilon: f64, seed: u64) -> Self {
        NoiseSettings {
            epsilon,
            seed,
            samples: DEFAULT_SAMPLES,
            degree: DegreeChoice::default(),
            parity: Parity::Any,
        }
    }
}

/// Where `m′(t_i)` comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementSource {
    Exact,
    Noisy(NoiseSettings),
}

#[derive(Debug, Clone)]
pub struct Regularized {
    pub series: MeasurementSeries,
    pub fit: PolyFit,
}

pub fn regularize(case: &ManufacturedCase, noise: &NoiseSettings) -> Result<Regularized> {
    let series = generate_noisy(&case.measurement, case.final_time(), noise.samples, noise.epsilon, noise.seed)?;
    let degree = match noise.degree {
        DegreeChoice::Fixed(d) => d,
        DegreeChoice::Auto {
            max_degree,
            threshold_percent,
        } => {
            let curve = residual_curve(&series, noise.parity, max_degree)?;
            select_from_curve(&curve, threshold_percent, l2_mean(&series.values))
        }
    };
    let fit = fit_polynomial(&series, degree, noise.parity)?;
    Ok(Regularized { series, fit })
}

#[derive(Debug, Clone)]
pub struct InverseRun {
    pub result: InverseResult,
    pub errors: ErrorReport,
    pub regularized: Option<Regularized>,
}

/// Full pipeline for one case: measurement (exact or regularized noisy),
/// inverse solve with every step stored, errors against the exact pair.
pub fn run_inverse(
    case: &ManufacturedCase,
    mesh: &Mesh,
    grid: &TimeGrid,
    source: &MeasurementSource,
    opts: StudyOptions,
) -> Result<InverseRun> {
    let spec = case.spec_with(&opts);
    let times: Vec<f64> = (1..=grid.steps()).map(|i| grid.time(i)).collect();
    let (m_prime, regularized): (Vec<f64>, _) = match source {
        MeasurementSource::Exact => (times.iter().map(|&t| spec.measurement_rate.eval(t)).collect(), None),
        MeasurementSource::Noisy(noise) => {
            let reg = regularize(case, noise)?;
            (times.iter().map(|&t| reg.fit.derivative(t)).collect(), Some(reg))
        }
    };
    let opts = SolverOptions {
        cg: opts.cg,
        store_all_steps: true,
        snapshot_times: Vec::new(),
    };
    let result = inverse_solve(&spec, mesh, grid, &m_prime, &opts)?;
    let errors = compute_errors(&spec, mesh, grid, &result)?;
    Ok(InverseRun {
        result,
        errors,
        regularized,
    })
}

/// Direct problem with source `f + p h_exact`, errors against the exact `u`.
pub fn run_direct(
    case: &ManufacturedCase,
    mesh: &Mesh,
    grid: &TimeGrid,
    opts: StudyOptions,
) -> Result<(Trajectory, ErrorReport)> {
    let spec = case.spec_with(&opts);
    let traj = direct_solve(&spec, mesh, grid, &case.direct_source(), opts.cg)?;
    let errors = trajectory_errors(&spec, mesh, &traj)?;
    Ok((traj, errors))
}
