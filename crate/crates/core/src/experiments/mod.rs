//! Manufactured-solution experiments, error metrics and convergence studies.

mod cases;
mod study;

pub use cases::{
    build_case, kappa, ManufacturedCase, DEFAULT_ELEMENTS_1D, DEFAULT_GRID_2D, DEFAULT_STEPS, ETA, FINAL_TIME,
};
pub use study::{
    compute_errors, convergence_study, eoc, regularize, run_direct, run_inverse, trajectory_errors, ConvergenceRow,
    DegreeChoice, ErrorReport, InverseRun, MeasurementSource, NoiseSettings, Regularized, StudyOptions, ERROR_FLOOR,
};
