use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A coefficient left its admissible range at some evaluation point.
    #[error("coefficient bound violated: {name} = {value:e} at t = {t}, x = {x:?}")]
    CoefficientBound {
        name: String,
        value: f64,
        t: f64,
        x: Vec<f64>,
    },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("conjugate gradients did not converge after {iterations} iterations (relative residual {relative_residual:e})")]
    ConvergenceFailure {
        iterations: usize,
        relative_residual: f64,
    },

    /// |∫ p(t,·) dx| fell below the admissible minimum.
    #[error("degenerate source profile at t = {t}: |omega| = {omega:e} < {omega_min:e}")]
    DegenerateProfile { t: f64, omega: f64, omega_min: f64 },

    #[error("least-squares fit failed: {0}")]
    FitFailure(String),

    #[error("relative improvement undefined: previous residual is zero")]
    DegenerateImprovement,

    #[error("unknown manufactured case {0} (expected 1..=4)")]
    UnknownCase(u32),

    #[error("missing reference: {0}")]
    MissingReference(String),

    #[error("time step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }

    /// Time step the error was raised at, if any.
    pub fn step(&self) -> Option<usize> {
        match self {
            Error::Step { step, .. } => Some(*step),
            _ => None,
        }
    }

    /// Innermost error, stripping step annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            e => e,
        }
    }
}
