//! Jacobi-preconditioned conjugate gradients.

use crate::error::{Error, Result};
use crate::fem::sparse::{dot, norm2, CsrMatrix};

pub const DEFAULT_REL_TOL: f64 = 1e-12;

/// Relative tolerance of the symmetry check applied before solving.
const SYMMETRY_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub rel_tol: f64,
    /// `None` means `10 · n`.
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            rel_tol: DEFAULT_REL_TOL,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖b − Ax‖₂ / ‖b‖₂`, recomputed from the returned `x`.
    pub relative_residual: f64,
}

/// Solves `A x = b` to `‖Ax − b‖₂ ≤ rel_tol · ‖b‖₂`.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let opts = CgOptions {
        rel_tol,
        max_iter: Some(max_iter),
    };
    pcg(a, b, None, opts).map(|s| s.x)
}

/// Preconditioned CG starting from `x0` (zero if `None`).
///
/// Convergence is declared only on the true residual `b − Ax`; when the
/// recursively updated residual drops below tolerance but the true one has
/// not, the iteration restarts from the true residual.
pub fn pcg(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, opts: CgOptions) -> Result<CgSolution> {
    let n = a.n_rows();
    if a.n_cols() != n {
        return Err(Error::InvalidMatrix(format!("{}x{} is not square", n, a.n_cols())));
    }
    a.check_vec(b)?;
    if !a.is_symmetric(SYMMETRY_TOL) {
        return Err(Error::InvalidMatrix(format!(
            "not symmetric (max |A - A^T| = {:e})",
            a.asymmetry()
        )));
    }
    let diag = a.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidMatrix("non-positive diagonal entry".into()));
    }
    let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let max_iter = opts.max_iter.unwrap_or(10 * n);

    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let target = opts.rel_tol * b_norm;

    let mut x = match x0 {
        Some(x0) => {
            a.check_vec(x0)?;
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let true_residual = |x: &[f64], r: &mut [f64], scratch: &mut [f64]| {
        a.mul_vec_into(x, scratch);
        for ((ri, bi), si) in r.iter_mut().zip(b).zip(scratch.iter()) {
            *ri = bi - si;
        }
        norm2(r)
    };

    let mut iterations = 0;
    let mut r_norm = true_residual(&x, &mut r, &mut ap);
    loop {
        if r_norm <= target {
            return Ok(CgSolution {
                x,
                iterations,
                relative_residual: r_norm / b_norm,
            });
        }
        if iterations >= max_iter {
            return Err(Error::ConvergenceFailure {
                iterations,
                relative_residual: r_norm / b_norm,
            });
        }
        // (Re)start from the current true residual.
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            iterations += 1;
            a.mul_vec_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::InvalidMatrix(format!(
                    "not positive definite (pᵀAp = {pap:e})"
                )));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if norm2(&r) <= target {
                break;
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        r_norm = true_residual(&x, &mut r, &mut ap);
    }
}
