//! Characteristic polynomials, polynomial roots and the Routh test.

use num_complex::Complex64;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Coefficients `[1, c1, ..., cn]` of `det(sI - A)` by Faddeev-LeVerrier.
pub fn char_poly(a: &Matrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::invalid(
            "characteristic polynomial of a non-square matrix",
        ));
    }
    let n = a.rows();
    let mut coeffs = vec![1.0];
    let mut m = Matrix::zeros(n, n);
    let id = Matrix::identity(n);
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{k-1} I,  c_k = -tr(A M_k) / k
        let am = a * &m;
        m = &am + &id.scale(coeffs[k - 1]);
        let c = -(a * &m).trace() / k as f64;
        coeffs.push(c);
    }
    Ok(coeffs)
}

/// All complex roots of the polynomial `coeffs[0] s^n + ... + coeffs[n]`
/// by Durand-Kerner iteration.
pub fn poly_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let lead = coeffs.iter().position(|&c| c != 0.0);
    let Some(lead) = lead else {
        return Err(Error::invalid("zero polynomial has no isolated roots"));
    };
    let c: Vec<f64> = coeffs[lead..].iter().map(|v| v / coeffs[lead]).collect();
    let n = c.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    // Cauchy bound on root moduli.
    let radius = 1.0 + c[1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // Start on a circle, rotated off the real axis so conjugate pairs separate.
    let mut roots: Vec<Complex64> = (0..n)
        .map(|k| {
            let angle = std::f64::consts::TAU * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(0.5 * radius, angle)
        })
        .collect();
    let eval = |s: Complex64| {
        c.iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &v| acc * s + v)
    };
    for _ in 0..2000 {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() == 0.0 {
                denom = Complex64::new(1e-12, 1e-12);
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            delta = delta.max(step.norm() / roots[i].norm().max(1.0));
        }
        if delta < 1e-15 {
            break;
        }
    }
    if roots.iter().any(|r| !r.re.is_finite() || !r.im.is_finite()) {
        return Err(Error::NoConvergence {
            iterations: 2000,
            residual: f64::NAN,
        });
    }
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(roots)
}

/// Eigenvalues of a general square matrix, largest real part first.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<Complex64>> {
    poly_roots(&char_poly(a)?)
}

/// Routh array of `coeffs[0] s^n + ... + coeffs[n]`, `coeffs[0] > 0`.
/// Returns the table, or an error naming the first row whose leading entry
/// is not strictly positive (row 0 is the `s^n` row).
pub fn routh_table(coeffs: &[f64]) -> Result<Vec<Vec<f64>>> {
    if coeffs.is_empty() || !(coeffs[0] > 0.0) {
        return Err(Error::NotHurwitz(
            "leading coefficient must be positive".into(),
        ));
    }
    let n = coeffs.len() - 1;
    let width = n / 2 + 1;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut r0 = vec![0.0; width];
    let mut r1 = vec![0.0; width];
    for (i, &c) in coeffs.iter().enumerate() {
        if i % 2 == 0 {
            r0[i / 2] = c;
        } else {
            r1[i / 2] = c;
        }
    }
    rows.push(r0);
    if n == 0 {
        return Ok(rows);
    }
    rows.push(r1);
    let scale = coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eps = 1e-12 * scale;
    for k in 1..=n {
        let lead = rows[k][0];
        if !(lead > eps) {
            return Err(Error::NotHurwitz(format!(
                "Routh row {k} (s^{}) has leading entry {lead:e}",
                n - k
            )));
        }
        if k == n {
            break;
        }
        let prev = &rows[k - 1];
        let cur = &rows[k];
        let next: Vec<f64> = (0..width)
            .map(|j| {
                let a = prev.get(j + 1).copied().unwrap_or(0.0);
                let b = cur.get(j + 1).copied().unwrap_or(0.0);
                (lead * a - prev[0] * b) / lead
            })
            .collect();
        rows.push(next);
    }
    Ok(rows)
}

/// True when every root of the polynomial has negative real part.
pub fn is_hurwitz_poly(coeffs: &[f64]) -> bool {
    routh_table(coeffs).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn faddeev_leverrier() {
        let g = Matrix::from_rows(&[&[0.0, 1.0], &[-2.0, -2.0]]);
        let c = char_poly(&g).unwrap();
        assert_eq!(c, vec![1.0, 2.0, 2.0]);
        let a = Matrix::from_rows(&[&[2.0, 0.0, 0.0], &[1.0, 3.0, 0.0], &[4.0, 5.0, -1.0]]);
        let c = char_poly(&a).unwrap();
        // (s-2)(s-3)(s+1) = s^3 - 4s^2 + s + 6
        for (got, want) in c.iter().zip([1.0, -4.0, 1.0, 6.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn durand_kerner() {
        let r = poly_roots(&[1.0, -4.0, 1.0, 6.0]).unwrap();
        let re: Vec<f64> = r.iter().map(|z| z.re).collect();
        assert!((re[0] - 3.0).abs() < 1e-10 && (re[1] - 2.0).abs() < 1e-10);
        assert!((re[2] + 1.0).abs() < 1e-10);
        let r = poly_roots(&[1.0, 2.0, 2.0]).unwrap();
        assert!((r[0].re + 1.0).abs() < 1e-10 && (r[0].im.abs() - 1.0).abs() < 1e-10);
        let r = poly_roots(&[1.0, 0.0, 1.0]).unwrap();
        assert!(r.iter().all(|z| z.re.abs() < 1e-10));
    }

    #[test]
    fn routh() {
        assert!(routh_table(&[1.0, 2.0, 2.0]).is_ok());
        assert!(routh_table(&[1.0, 6.0, 11.0, 6.0]).is_ok());
        // s^2 + 1: zero row.
        let e = routh_table(&[1.0, 0.0, 1.0]).unwrap_err();
        assert!(e.to_string().contains("row 1"), "{e}");
        // s - 1
        let e = routh_table(&[1.0, -1.0]).unwrap_err();
        assert!(e.to_string().contains("row 1"), "{e}");
        // s^3 + s^2 + s + 2 has a right-half-plane pair.
        let e = routh_table(&[1.0, 1.0, 1.0, 2.0]).unwrap_err();
        assert!(e.to_string().contains("row 2"), "{e}");
    }
}
