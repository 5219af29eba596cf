//! Damped Newton iteration for square nonlinear systems.

use super::diff::jacobian_fd;
use crate::error::{Error, Result};
use crate::model::norm2;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 50;

/// Solves `fun(v) = 0` from `v0`. The Jacobian is taken by central
/// differences; steps are halved until the residual norm decreases.
/// On success `||fun(v)|| <= tol`.
pub fn newton_root<F>(fun: F, v0: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut v = v0.to_vec();
    let mut r = fun(&v);
    if r.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            found: r.len(),
        });
    }
    let mut res = norm2(&r);
    if !res.is_finite() {
        return Err(Error::NonFinite {
            what: "residual at the initial guess".into(),
            axis: r.iter().position(|x| !x.is_finite()).unwrap_or(0),
        });
    }
    for _ in 0..max_iter {
        if res <= tol {
            return Ok(v);
        }
        let j = jacobian_fd(&fun, &v, None)?;
        let neg: Vec<f64> = r.iter().map(|x| -x).collect();
        let step = j.solve(&neg).map_err(|e| match e {
            Error::Singular { estimate, .. } => Error::Singular {
                what: "Newton Jacobian".into(),
                estimate,
            },
            other => other,
        })?;
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = v.iter().zip(&step).map(|(a, s)| a + alpha * s).collect();
            let rt = fun(&trial);
            let rn = norm2(&rt);
            if rn.is_finite() && (rn < res || alpha < 1e-3) {
                v = trial;
                r = rt;
                res = rn;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-3 {
                // Accept the smallest step only if it is finite.
                if !rn.is_finite() {
                    return Err(Error::NoConvergence {
                        iterations: max_iter,
                        residual: res,
                    });
                }
            }
        }
    }
    if res <= tol {
        Ok(v)
    } else {
        Err(Error::NoConvergence {
            iterations: max_iter,
            residual: res,
        })
    }
}
