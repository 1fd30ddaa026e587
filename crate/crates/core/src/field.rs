//! Evaluable space-time data.

use std::fmt;
use std::sync::Arc;

type FieldFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;
type BoundaryFn = dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync;
type RealFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A real field `(t, x) -> value` on the closed domain.
#[derive(Clone)]
pub struct ScalarField(Arc<FieldFn>);

impl ScalarField {
    pub fn new(f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField(Arc::new(f))
    }

    pub fn constant(value: f64) -> Self {
        Self::new(move |_, _| value)
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        (self.0)(t, x)
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarField")
    }
}

/// A field on ∂Ω; evaluation also receives the outward unit normal.
#[derive(Clone)]
pub struct BoundaryField(Arc<BoundaryFn>);

impl BoundaryField {
    pub fn new(f: impl Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        BoundaryField(Arc::new(f))
    }

    pub fn zero() -> Self {
        Self::new(|_, _, _| 0.0)
    }

    pub fn eval(&self, t: f64, x: &[f64], normal: &[f64]) -> f64 {
        (self.0)(t, x, normal)
    }
}

impl fmt::Debug for BoundaryField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BoundaryField")
    }
}

/// A scalar function of time, e.g. a measurement `m(t)` or a source amplitude.
#[derive(Clone)]
pub struct TimeFunction(Arc<RealFn>);

impl TimeFunction {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TimeFunction(Arc::new(f))
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

impl fmt::Debug for TimeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TimeFunction")
    }
}

/// Lipschitz reaction term `F: R -> R` together with its Lipschitz constant.
#[derive(Clone)]
pub struct Nonlinearity {
    func: Arc<RealFn>,
    pub lipschitz: f64,
}

impl Nonlinearity {
    pub fn new(lipschitz: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Nonlinearity {
            func: Arc::new(f),
            lipschitz,
        }
    }

    pub fn linear(slope: f64) -> Self {
        Self::new(slope.abs(), move |u| slope * u)
    }

    pub fn zero() -> Self {
        Self::linear(0.0)
    }

    pub fn eval(&self, u: f64) -> f64 {
        (self.func)(u)
    }
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}
