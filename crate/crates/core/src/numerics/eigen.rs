//! Symmetric eigensolver (cyclic Jacobi) and derived quantities.

use super::matrix::Matrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix. `vectors` holds the
/// eigenvectors as columns, in the same order as `values` (ascending).
#[derive(Clone, Debug)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenResult {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }

    /// `Q diag(φ(λ)) Qᵀ`.
    pub fn map_spectrum(&self, phi: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let mut out = Matrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = phi(lam);
            for r in 0..n {
                let qr = self.vectors[(r, k)] * w;
                for c in 0..n {
                    out[(r, c)] += qr * self.vectors[(c, k)];
                }
            }
        }
        out
    }
}

/// Full spectrum of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eig(s: &Matrix) -> Result<EigenResult> {
    if !s.is_square() {
        return Err(Error::invalid("sym_eig requires a square matrix"));
    }
    if !s.is_finite() {
        return Err(Error::NonFinite {
            what: "sym_eig input".into(),
            axis: 0,
        });
    }
    let n = s.rows();
    let scale = s.max_abs();
    let asym = s.asymmetry();
    if asym > 1e-10 * scale.max(1e-300) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let mut a = s.sym_part();
    let mut v = Matrix::identity(n);
    let fro = a.norm_fro();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)] * a[(p, q)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * fro || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                rotate(&mut a, &mut v, p, q, c, sn);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, k)] = v[(r, i)];
        }
    }
    Ok(EigenResult { values, vectors })
}

// Applies the rotation J(p, q) so that A <- Jᵀ A J and V <- V J.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// `σ_max / σ_min` of `t`, from the spectrum of `tᵀt`.
pub fn condition_number(t: &Matrix) -> Result<f64> {
    if !t.is_square() {
        return Err(Error::invalid("condition number of non-square matrix"));
    }
    let tt = &t.transpose() * t;
    let e = sym_eig(&tt)?;
    let smax = e.max().max(0.0).sqrt();
    let smin = e.min().max(0.0).sqrt();
    if smin <= 1e-12 * smax || smax == 0.0 {
        return Err(Error::Singular {
            what: "metric".into(),
            estimate: smin,
        });
    }
    Ok(smax / smin)
}

/// Symmetric positive definite square root inverse `M^{-1/2}`.
pub fn inv_sqrt_spd(m: &Matrix) -> Result<Matrix> {
    let e = sym_eig(m)?;
    if e.min() <= 0.0 {
        return Err(Error::Singular {
            what: "metric (not positive definite)".into(),
            estimate: e.min(),
        });
    }
    Ok(e.map_spectrum(|l| 1.0 / l.sqrt()))
}
