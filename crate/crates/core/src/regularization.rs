//! Noisy measurements and their polynomial regularization.
//!
//! Noisy samples `m^ε(t_j) = m(t_j)(1 + ε R_j)` are drawn on `t_j = jT/Ñ`
//! with `R_j` uniform on [−1, 1] from a SplitMix64 stream. They are fitted by
//! least squares in the scaled variable `s = 2t/T − 1`, optionally restricted
//! to even or odd powers, and `m′` is taken as the analytic derivative of
//! the fit.

use nalgebra::{DMatrix, DVector};
use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};
use crate::field::TimeFunction;

pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_THRESHOLD_PERCENT: f64 = 5.0;

/// A fit whose ℓ² residual is below this fraction of the data norm counts as
/// exact; higher degrees are then not considered improvements.
const EXACT_FIT_RELATIVE: f64 = 1e-12;

/// Rank tolerance on `|R_kk| / max |R_jj|` of the QR factor.
const RANK_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Any,
    Even,
    Odd,
}

impl Parity {
    pub fn admits(self, power: usize) -> bool {
        match self {
            Parity::Any => true,
            Parity::Even => power % 2 == 0,
            Parity::Odd => power % 2 == 1,
        }
    }

    /// Step between consecutive candidate degrees.
    pub fn step(self) -> usize {
        match self {
            Parity::Any => 1,
            _ => 2,
        }
    }

    pub fn first_degree(self) -> usize {
        match self {
            Parity::Odd => 1,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSeries {
    pub times: Vec<f64>,
    pub exact: Vec<f64>,
    pub values: Vec<f64>,
    pub epsilon: f64,
    pub seed: u64,
    pub final_time: f64,
}

/// Discrete norm `√((1/(Ñ+1)) Σ_j |v_j|²)`.
pub fn l2_mean(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Uniform draws on [−1, 1]: `2 u − 1` with `u` the top 53 bits of each
/// SplitMix64 output scaled to [0, 1).
pub fn uniform_noise(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            2.0 * u - 1.0
        })
        .collect()
}

/// Samples `m` at `t_j = j T / n_samples`, `j = 0..=n_samples`, with relative noise `epsilon`.
pub fn generate_noisy(
    m: &TimeFunction,
    final_time: f64,
    n_samples: usize,
    epsilon: f64,
    seed: u64,
) -> Result<MeasurementSeries> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level must be >= 0, got {epsilon}")));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sampling interval".into()));
    }
    if !(final_time > 0.0) {
        return Err(Error::InvalidArgument(format!("final time must be positive, got {final_time}")));
    }
    let times: Vec<f64> = (0..=n_samples)
        .map(|j| j as f64 * final_time / n_samples as f64)
        .collect();
    let exact: Vec<f64> = times.iter().map(|&t| m.eval(t)).collect();
    let noise = uniform_noise(seed, times.len());
    let values = exact
        .iter()
        .zip(&noise)
        .map(|(m, r)| m * (1.0 + epsilon * r))
        .collect();
    Ok(MeasurementSeries {
        times,
        exact,
        values,
        epsilon,
        seed,
        final_time,
    })
}

impl MeasurementSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same sample times with all values multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out.exact.iter_mut().for_each(|v| *v *= factor);
        out
    }
}

/// Least-squares polynomial in `s = 2t/T − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    pub degree: usize,
    pub parity: Parity,
    /// Monomial coefficients `c_k` of `s^k`, `k = 0..=degree`; powers
    /// excluded by the parity are exactly zero.
    pub coefficients: Vec<f64>,
    /// ‖p − m^ε‖_ℓ² over the samples.
    pub residual: f64,
    pub final_time: f64,
}

impl PolyFit {
    fn scaled(&self, t: f64) -> f64 {
        2.0 * t / self.final_time - 1.0
    }

    pub fn eval(&self, t: f64) -> f64 {
        let s = self.scaled(t);
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    /// d/dt of the fit, including the factor 2/T from the scaling.
    pub fn derivative(&self, t: f64) -> f64 {
        let s = self.scaled(t);
        let ds = self
            .coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * s + k as f64 * c);
        ds * 2.0 / self.final_time
    }
}

pub fn eval_fit_derivative(fit: &PolyFit, t: f64) -> f64 {
    fit.derivative(t)
}

/// Least-squares fit of the given degree over the parity-restricted monomial
/// basis, solved by Householder QR of the scaled Vandermonde matrix.
pub fn fit_polynomial(series: &MeasurementSeries, degree: usize, parity: Parity) -> Result<PolyFit> {
    let powers: Vec<usize> = (0..=degree).filter(|&k| parity.admits(k)).collect();
    if powers.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no {parity:?} powers up to degree {degree}"
        )));
    }
    let n = series.len();
    if degree >= n {
        return Err(Error::InvalidArgument(format!(
            "degree {degree} needs more than {n} samples"
        )));
    }
    let t_final = series.final_time;
    let s: Vec<f64> = series.times.iter().map(|&t| 2.0 * t / t_final - 1.0).collect();
    let design = DMatrix::from_fn(n, powers.len(), |i, j| s[i].powi(powers[j] as i32));
    let rhs = DVector::from_column_slice(&series.values);

    let qr = design.qr();
    let r = qr.r();
    let r_max = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if r.diagonal().iter().any(|v| !(v.abs() > RANK_TOL * r_max)) {
        return Err(Error::FitFailure(format!(
            "rank-deficient design matrix for degree {degree} ({parity:?})"
        )));
    }
    let qt_b = qr.q().transpose() * &rhs;
    let solved = r
        .solve_upper_triangular(&qt_b)
        .ok_or_else(|| Error::FitFailure("singular triangular factor".into()))?;

    let mut coefficients = vec![0.0; degree + 1];
    for (&k, &c) in powers.iter().zip(solved.iter()) {
        coefficients[k] = c;
    }
    let mut fit = PolyFit {
        degree,
        parity,
        coefficients,
        residual: 0.0,
        final_time: t_final,
    };
    let misfit: Vec<f64> = series
        .times
        .iter()
        .zip(&series.values)
        .map(|(&t, &v)| fit.eval(t) - v)
        .collect();
    fit.residual = l2_mean(&misfit);
    Ok(fit)
}

/// `100 (E_prev − E_next) / E_prev`.
pub fn improvement_percent(e_prev: f64, e_next: f64) -> Result<f64> {
    if e_prev == 0.0 {
        return Err(Error::DegenerateImprovement);
    }
    Ok(100.0 * (e_prev - e_next) / e_prev)
}

pub fn relative_improvement(
    series: &MeasurementSeries,
    d_prev: usize,
    d_next: usize,
    parity: Parity,
) -> Result<f64> {
    let e_prev = fit_polynomial(series, d_prev, parity)?.residual;
    let e_next = fit_polynomial(series, d_next, parity)?.residual;
    improvement_percent(e_prev, e_next)
}

/// `(d, E(d))` for every candidate degree up to `max_degree`.
pub fn residual_curve(series: &MeasurementSeries, parity: Parity, max_degree: usize) -> Result<Vec<(usize, f64)>> {
    (parity.first_degree()..=max_degree)
        .step_by(parity.step())
        .map(|d| fit_polynomial(series, d, parity).map(|f| (d, f.residual)))
        .collect()
}

/// Smallest candidate `d` whose successor improves by less than
/// `threshold_percent`; the last candidate if none does. `data_norm` is the
/// ℓ² size of the fitted data, used to recognise exact fits.
pub fn select_from_curve(curve: &[(usize, f64)], threshold_percent: f64, data_norm: f64) -> usize {
    for pair in curve.windows(2) {
        let ((d, e_prev), (_, e_next)) = (pair[0], pair[1]);
        if e_prev <= EXACT_FIT_RELATIVE * data_norm {
            return d;
        }
        if 100.0 * (e_prev - e_next) / e_prev < threshold_percent {
            return d;
        }
    }
    curve.last().map_or(0, |&(d, _)| d)
}

pub fn select_degree(
    series: &MeasurementSeries,
    parity: Parity,
    max_degree: usize,
    threshold_percent: f64,
) -> Result<usize> {
    if max_degree < parity.first_degree() {
        return Err(Error::InvalidArgument(format!(
            "max degree {max_degree} below first {parity:?} degree"
        )));
    }
    let curve = residual_curve(series, parity, max_degree)?;
    Ok(select_from_curve(&curve, threshold_percent, l2_mean(&series.values)))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;

    use super::*;

    fn m1() -> TimeFunction {
        TimeFunction::new(|t| 2.0 / PI * (-t).exp())
    }

    fn poly_series(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> MeasurementSeries {
        generate_noisy(&TimeFunction::new(f), 1.0, 100, 0.0, 0).unwrap()
    }

    #[test]
    fn splitmix_stream_is_canonical() {
        // First SplitMix64 output for state 0 is 0xe220a8397b1dcdaf.
        let r = uniform_noise(0, 1)[0];
        let expected = 2.0 * ((0xe220a8397b1dcdafu64 >> 11) as f64 / (1u64 << 53) as f64) - 1.0;
        assert_eq!(r, expected);
    }

    #[test]
    fn noise_free_series_is_exact() {
        let s = generate_noisy(&m1(), 1.0, 100, 0.0, 7).unwrap();
        assert_eq!(s.len(), 101);
        assert_eq!(s.values, s.exact);
        assert_eq!(s.times[100], 1.0);
    }

    #[test]
    fn negative_noise_rejected() {
        assert!(matches!(generate_noisy(&m1(), 1.0, 100, -0.1, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn noise_is_bounded_and_reproducible() {
        let a = generate_noisy(&m1(), 1.0, 100, 0.05, 3).unwrap();
        let b = generate_noisy(&m1(), 1.0, 100, 0.05, 3).unwrap();
        assert_eq!(a, b);
        for (v, m) in a.values.iter().zip(&a.exact) {
            assert!((v - m).abs() <= 0.05 * m.abs());
        }
    }

    #[test]
    fn noise_rms_matches_uniform_law() {
        // rms of uniform[-1,1] is 1/√3; check the relative perturbation over 20 seeds.
        let eps = 0.05;
        for seed in 0..20 {
            let s = generate_noisy(&m1(), 1.0, 100, eps, seed).unwrap();
            let rel: Vec<f64> = s.values.iter().zip(&s.exact).map(|(v, m)| (v - m) / m).collect();
            let ratio = l2_mean(&rel) / (eps / 3f64.sqrt());
            assert!((0.5..=1.5).contains(&ratio), "seed {seed}: {ratio}");
        }
    }

    #[test]
    fn exact_cubic_reproduced() {
        let s = poly_series(|t| 1.0 - 2.0 * t + 0.5 * t * t - 3.0 * t.powi(3));
        let fit = fit_polynomial(&s, 3, Parity::Any).unwrap();
        assert!(fit.residual <= 1e-10);
    }

    #[test]
    fn derivative_of_exact_quadratic() {
        let fit = fit_polynomial(&poly_series(|t| 3.0 * t * t), 2, Parity::Any).unwrap();
        assert!((fit.derivative(1.0) - 6.0).abs() < 1e-10);
        let constant = fit_polynomial(&poly_series(|_| 4.0), 0, Parity::Any).unwrap();
        assert_eq!(eval_fit_derivative(&constant, 0.3), 0.0);
    }

    #[test]
    fn degree_six_tracks_measurement_rate() {
        let fit = fit_polynomial(&generate_noisy(&m1(), 1.0, 100, 0.0, 0).unwrap(), 6, Parity::Any).unwrap();
        let worst = (1..=200)
            .map(|i| i as f64 / 200.0)
            .map(|t| (fit.derivative(t) + 2.0 / PI * (-t).exp()).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-4, "{worst}");
    }

    #[test]
    fn parity_excludes_powers() {
        // An even function of s = 2t - 1.
        let s = poly_series(|t| {
            let s = 2.0 * t - 1.0;
            1.0 + s * s - 0.3 * s.powi(4)
        });
        let fit = fit_polynomial(&s, 6, Parity::Even).unwrap();
        assert!(fit.residual <= 1e-10);
        assert!(fit.coefficients.iter().skip(1).step_by(2).all(|&c| c == 0.0));
        let odd = fit_polynomial(&s, 5, Parity::Odd).unwrap();
        assert!(odd.coefficients.iter().step_by(2).all(|&c| c == 0.0));
    }

    #[test]
    fn degree_limits() {
        let s = generate_noisy(&m1(), 1.0, 4, 0.0, 0).unwrap();
        assert!(fit_polynomial(&s, 5, Parity::Any).is_err());
        assert!(fit_polynomial(&s, 0, Parity::Odd).is_err());
    }

    #[test]
    fn improvement_edge_cases() {
        assert_eq!(improvement_percent(2.0, 2.0).unwrap(), 0.0);
        assert_eq!(improvement_percent(0.0, 1.0), Err(Error::DegenerateImprovement));
    }

    #[test]
    fn exact_quadratic_selects_two() {
        let s = poly_series(|t| 0.5 + t - 2.0 * t * t);
        assert_eq!(select_degree(&s, Parity::Any, 8, 5.0).unwrap(), 2);
    }

    #[test]
    fn selection_falls_back_to_max_degree() {
        let s = generate_noisy(&TimeFunction::new(|t| (3.0 * t).exp()), 1.0, 100, 0.0, 0).unwrap();
        assert_eq!(select_degree(&s, Parity::Any, 3, 5.0).unwrap(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn residual_non_increasing_in_nested_basis(seed in 0u64..1000, eps in 0.0f64..0.1) {
            let s = generate_noisy(&m1(), 1.0, 100, eps, seed).unwrap();
            for parity in [Parity::Any, Parity::Even] {
                let curve = residual_curve(&s, parity, 10).unwrap();
                for w in curve.windows(2) {
                    prop_assert!(w[1].1 <= w[0].1 * (1.0 + 1e-12) + 1e-15);
                }
            }
        }

        #[test]
        fn scaling_data_scales_residuals_only(seed in 0u64..1000, eps in 0.001f64..0.1, c in -50.0f64..50.0) {
            prop_assume!(c.abs() > 1e-3);
            let s = generate_noisy(&m1(), 1.0, 100, eps, seed).unwrap();
            let sc = s.scaled(c);
            let a = fit_polynomial(&s, 3, Parity::Any).unwrap();
            let b = fit_polynomial(&sc, 3, Parity::Any).unwrap();
            prop_assert!((b.residual - c.abs() * a.residual).abs() <= 1e-10 * c.abs() * a.residual);
            let ra = relative_improvement(&s, 1, 2, Parity::Any).unwrap();
            let rb = relative_improvement(&sc, 1, 2, Parity::Any).unwrap();
            prop_assert!((ra - rb).abs() < 1e-8);
            prop_assert_eq!(select_degree(&s, Parity::Any, 8, 5.0).unwrap(), select_degree(&sc, Parity::Any, 8, 5.0).unwrap());
        }
    }
}
