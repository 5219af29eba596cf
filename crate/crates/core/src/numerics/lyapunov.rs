//! Continuous Lyapunov equation `AᵀP + PA = -Q`.

use super::matrix::Matrix;
use super::poly::{char_poly, eigenvalues, routh_table};
use crate::error::{Error, Result};

/// Rejects `a` unless every eigenvalue has negative real part. The verdict
/// comes from the Routh test; the message reports the eigenvalue with the
/// largest real part.
pub fn require_hurwitz(a: &Matrix) -> Result<()> {
    let cp = char_poly(a)?;
    if routh_table(&cp).is_ok() {
        return Ok(());
    }
    let worst = eigenvalues(a)?
        .into_iter()
        .next()
        .map(|z| format!("eigenvalue {:.6} {:+.6}i", z.re, z.im))
        .unwrap_or_else(|| "empty matrix".into());
    Err(Error::NotHurwitz(worst))
}

/// Solves `AᵀP + PA = -Q` for symmetric `P` as a dense linear system in the
/// `n(n+1)/2` upper-triangular entries.
pub fn lyapunov_solve(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    if !a.is_square() || !q.is_square() || a.rows() != q.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: q.rows(),
        });
    }
    if q.asymmetry() > 1e-10 * q.max_abs().max(1e-300) {
        return Err(Error::NotSymmetric {
            asymmetry: q.asymmetry(),
        });
    }
    require_hurwitz(a)?;
    let n = a.rows();
    let idx = |i: usize, j: usize| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // Row-wise packing of the upper triangle.
        i * n - i * (i + 1) / 2 + j
    };
    let unknowns = n * (n + 1) / 2;
    let mut lhs = Matrix::zeros(unknowns, unknowns);
    let mut rhs = vec![0.0; unknowns];
    for i in 0..n {
        for j in i..n {
            let row = idx(i, j);
            // (AᵀP + PA)_ij = Σ_k A_ki P_kj + P_ik A_kj
            for k in 0..n {
                lhs[(row, idx(k, j))] += a[(k, i)];
                lhs[(row, idx(i, k))] += a[(k, j)];
            }
            rhs[row] = -q[(i, j)];
        }
    }
    let sol = lhs.solve(&rhs)?;
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] = sol[idx(i, j)];
        }
    }
    Ok(p)
}
