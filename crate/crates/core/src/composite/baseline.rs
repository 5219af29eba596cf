//! Classical composite-Lyapunov bound on the perturbation parameter.
//!
//! With `V̇ <= -α1 ψ²` on the reduced system, `Ẇ <= -α2 φ²` on the boundary
//! layer and interconnection constants `β1, β2, β3`, the weighted function
//! `(1-d)V + dW` proves stability for every `μ < μ_d` with
//!
//! ```text
//! μ_d = α1 α2 / (α1 β3 + ((1-d) β1 + d β2)² / (4 d (1-d)))
//! ```

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaselineResult {
    /// `max_d μ_d` found by golden-section search.
    pub mu_max: f64,
    pub d_star: f64,
    /// Closed-form optimum `α1 α2 / (α1 β3 + β1 β2)` for comparison.
    pub mu_max_exact: f64,
    /// Closed-form optimizer `β1 / (β1 + β2)`.
    pub d_star_exact: f64,
}

/// `μ_d` for a given weight `d ∈ (0, 1)`.
pub fn composite_mu(d: f64, alpha1: f64, alpha2: f64, beta1: f64, beta2: f64, beta3: f64) -> f64 {
    let mix = (1.0 - d) * beta1 + d * beta2;
    alpha1 * alpha2 / (alpha1 * beta3 + mix * mix / (4.0 * d * (1.0 - d)))
}

pub fn mu_max_composite_lyapunov(
    alpha1: f64,
    alpha2: f64,
    beta1: f64,
    beta2: f64,
    beta3: f64,
) -> Result<BaselineResult> {
    if !(alpha1 > 0.0 && alpha2 > 0.0)
        || [beta1, beta2, beta3].iter().any(|b| !(*b >= 0.0))
        || !(beta3 > 0.0)
    {
        return Err(Error::invalid(
            "alpha1, alpha2, beta3 must be positive and beta1, beta2 nonnegative",
        ));
    }
    let mu = |d: f64| composite_mu(d, alpha1, alpha2, beta1, beta2, beta3);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (mu(c), mu(d));
    while b - a > 1e-6 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = mu(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = mu(d);
        }
    }
    let d_star = 0.5 * (a + b);
    let mu_max_exact = alpha1 * alpha2 / (alpha1 * beta3 + beta1 * beta2);
    // Any weight is optimal without cross terms.
    let d_star_exact = if beta1 + beta2 > 0.0 {
        beta1 / (beta1 + beta2)
    } else {
        0.5
    };
    Ok(BaselineResult {
        mu_max: mu(d_star),
        d_star,
        mu_max_exact,
        d_star_exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_constants() {
        let r = mu_max_composite_lyapunov(1.0, 2.0, 7.0 / 4.0, 4.0 / 3.0, 7.0 / 3.0).unwrap();
        assert!((r.mu_max - 3.0 / 7.0).abs() < 1e-9);
        assert!((r.d_star - 21.0 / 37.0).abs() < 1e-6);
        assert!((r.mu_max_exact - 3.0 / 7.0).abs() < 1e-15);
        // Equal weights reproduce 1152/2713.
        let half = composite_mu(0.5, 1.0, 2.0, 7.0 / 4.0, 4.0 / 3.0, 7.0 / 3.0);
        assert!((half - 1152.0 / 2713.0).abs() < 1e-15);
    }

    #[test]
    fn decoupled_and_symmetric() {
        let r = mu_max_composite_lyapunov(1.5, 2.0, 0.0, 0.0, 3.0).unwrap();
        assert!((r.mu_max - 1.5 * 2.0 / (1.5 * 3.0)).abs() < 1e-12);
        let r = mu_max_composite_lyapunov(1.0, 1.0, 2.0, 2.0, 1.0).unwrap();
        assert!((r.d_star - 0.5).abs() < 1e-6);
        // Grid-search oracle.
        let best = (1..10000)
            .map(|i| i as f64 / 10000.0)
            .max_by(|p, q| {
                composite_mu(*p, 1.0, 1.0, 2.0, 2.0, 1.0)
                    .total_cmp(&composite_mu(*q, 1.0, 1.0, 2.0, 2.0, 1.0))
            })
            .unwrap();
        assert!((best - 0.5).abs() < 1e-4);
    }
}
