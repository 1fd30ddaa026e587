//! Problem data and the uniform time grid.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};
use crate::fem::P1Space;
use crate::field::{BoundaryField, Nonlinearity, ScalarField, TimeFunction};
use crate::mesh::Mesh;

pub const DEFAULT_OMEGA_MIN: f64 = 1e-8;

/// All data of the inverse problem, including optional exact references
/// used by manufactured-solution tests.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    /// η, the coefficient of the mixed term `∇·(η ∇∂t u)`.
    pub eta: ScalarField,
    /// κ, the diffusion coefficient.
    pub kappa: ScalarField,
    /// F.
    pub reaction: Nonlinearity,
    /// p, the spatial profile multiplying the unknown amplitude.
    pub source_profile: ScalarField,
    /// g = κ ∇u·ν.
    pub neumann: BoundaryField,
    /// ∂t G with G = g / κ.
    pub neumann_rate: BoundaryField,
    /// Known additional forcing f(t, x).
    pub forcing: Option<ScalarField>,
    /// ũ₀.
    pub initial: ScalarField,
    /// m(t) = ∫_Ω u(t, x) dx.
    pub measurement: TimeFunction,
    /// m′(t).
    pub measurement_rate: TimeFunction,
    pub exact_u: Option<ScalarField>,
    pub exact_h: Option<TimeFunction>,
    pub final_time: f64,
    /// Smallest admissible |ω(t)| = |∫_Ω p(t, x) dx|.
    pub omega_min: f64,
}

/// Observed ranges from [`ProblemSpec::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    pub eta_range: (f64, f64),
    pub kappa_range: (f64, f64),
    pub min_abs_omega: f64,
}

impl ProblemSpec {
    /// Checks positivity of η and κ on the nodes × time grid, |ω(t_i)| ≥ ω_min
    /// at every time node, and the Lipschitz bound of F on sampled pairs.
    pub fn validate(&self, mesh: &Mesh, grid: &TimeGrid) -> Result<ValidationReport> {
        if !(self.final_time > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "final time must be positive, got {}",
                self.final_time
            )));
        }
        if (grid.final_time() - self.final_time).abs() > 1e-12 * self.final_time {
            return Err(Error::InvalidArgument(format!(
                "time grid ends at {} but the problem at {}",
                grid.final_time(),
                self.final_time
            )));
        }
        let space = P1Space::new(mesh);
        let mut eta_range = (f64::INFINITY, f64::NEG_INFINITY);
        let mut kappa_range = eta_range;
        let mut min_abs_omega = f64::INFINITY;
        for t in grid.nodes() {
            for x in mesh.nodes() {
                for (name, field, range) in [
                    ("eta", &self.eta, &mut eta_range),
                    ("kappa", &self.kappa, &mut kappa_range),
                ] {
                    let v = field.eval(t, x);
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(Error::CoefficientBound {
                            name: name.into(),
                            value: v,
                            t,
                            x: x.to_vec(),
                        });
                    }
                    range.0 = range.0.min(v);
                    range.1 = range.1.max(v);
                }
            }
            let omega: f64 = space.load(&self.source_profile, t).iter().sum();
            if !(omega.abs() >= self.omega_min) {
                return Err(Error::DegenerateProfile {
                    t,
                    omega,
                    omega_min: self.omega_min,
                });
            }
            min_abs_omega = min_abs_omega.min(omega.abs());
        }
        self.check_lipschitz(256)?;
        Ok(ValidationReport {
            eta_range,
            kappa_range,
            min_abs_omega,
        })
    }

    fn check_lipschitz(&self, pairs: usize) -> Result<()> {
        let mut rng = SplitMix64::seed_from_u64(0x5eed);
        let mut draw = || 20.0 * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64) - 10.0;
        let lf = self.reaction.lipschitz;
        for _ in 0..pairs {
            let (s1, s2) = (draw(), draw());
            let lhs = (self.reaction.eval(s1) - self.reaction.eval(s2)).abs();
            if lhs > lf * (s1 - s2).abs() * (1.0 + 1e-12) + 1e-14 {
                return Err(Error::InvalidArgument(format!(
                    "reaction term violates Lipschitz constant {lf} at ({s1}, {s2})"
                )));
            }
        }
        Ok(())
    }
}

/// Uniform grid `t_i = i τ`, `τ = T / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    final_time: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(final_time: f64, steps: usize) -> Result<Self> {
        if !(final_time > 0.0) || !final_time.is_finite() {
            return Err(Error::InvalidArgument(format!("final time must be positive, got {final_time}")));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("time grid needs at least one step".into()));
        }
        Ok(TimeGrid { final_time, steps })
    }

    /// Grid with step `tau`, which must divide `final_time`.
    pub fn with_step(final_time: f64, tau: f64) -> Result<Self> {
        let steps = (final_time / tau).round();
        if !(tau > 0.0) || steps < 1.0 || ((steps * tau) - final_time).abs() > 1e-9 * final_time {
            return Err(Error::InvalidArgument(format!("step {tau} does not divide {final_time}")));
        }
        Self::new(final_time, steps as usize)
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.final_time / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.final_time
        } else {
            i as f64 * self.tau()
        }
    }

    /// t_0, …, t_n.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|i| self.time(i))
    }
}
