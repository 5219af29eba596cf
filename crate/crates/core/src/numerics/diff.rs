//! Central-difference Jacobians.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Default step `1e-5 * max(1, ||p||)`.
pub fn default_step(p: &[f64]) -> f64 {
    1e-5 * crate::model::norm2(p).max(1.0)
}

/// Central-difference Jacobian of `field` at `p`. `h = None` picks
/// [`default_step`]. Rows index outputs, columns index inputs.
pub fn jacobian_fd<F>(field: F, p: &[f64], h: Option<f64>) -> Result<Matrix>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let h = h.unwrap_or_else(|| default_step(p));
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let n = p.len();
    let mut q = p.to_vec();
    let mut jac: Option<Matrix> = None;
    for j in 0..n {
        q[j] = p[j] + h;
        let fp = field(&q);
        q[j] = p[j] - h;
        let fm = field(&q);
        q[j] = p[j];
        if fp.iter().chain(&fm).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "field evaluation during differentiation".into(),
                axis: j,
            });
        }
        if fp.len() != fm.len() {
            return Err(Error::DimensionMismatch {
                expected: fp.len(),
                found: fm.len(),
            });
        }
        let jm = jac.get_or_insert_with(|| Matrix::zeros(fp.len(), n));
        if jm.rows() != fp.len() {
            return Err(Error::DimensionMismatch {
                expected: jm.rows(),
                found: fp.len(),
            });
        }
        for i in 0..fp.len() {
            jm[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    match jac {
        Some(j) => Ok(j),
        None => Ok(Matrix::zeros(field(p).len(), 0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_recovered() {
        let a = Matrix::from_rows(&[&[1.0, -2.0, 0.5], &[3.0, 0.0, -1.0]]);
        let j = jacobian_fd(|v| a.mul_vec(v), &[0.3, -0.7, 2.0], Some(1e-5)).unwrap();
        assert!((&j - &a).max_abs() < 1e-8);
    }

    #[test]
    fn square_and_cubic() {
        let j = jacobian_fd(|v| vec![v[0] * v[0]], &[3.0], Some(1e-5)).unwrap();
        assert!((j[(0, 0)] - 6.0).abs() < 1e-8);
        // f(x, z) = x z^3 at (1, 0.5): (z^3, 3 x z^2) = (0.125, 0.75).
        let j = jacobian_fd(|v| vec![v[0] * v[1].powi(3)], &[1.0, 0.5], None).unwrap();
        assert!((j[(0, 0)] - 0.125).abs() < 1e-8);
        assert!((j[(0, 1)] - 0.75).abs() < 1e-8);
    }

    #[test]
    fn non_finite_names_axis() {
        // sqrt is finite along axis 0 and NaN at z = -h along axis 1.
        let err = jacobian_fd(|v| vec![v[0] * v[1].sqrt()], &[1.0, 0.0], Some(1e-3)).unwrap_err();
        match err {
            Error::NonFinite { axis, .. } => assert_eq!(axis, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
