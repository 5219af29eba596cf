//! Closed-form convergence bounds for standard designs.

use crate::contraction::EPS_RATE;
use crate::error::{Error, Result};
use crate::model::BoundSet;

// Rates below EPS_RATE are semi-contracting and give no finite bound.
fn require_positive(name: &str, v: f64) -> Result<()> {
    if v >= EPS_RATE && v.is_finite() {
        Ok(())
    } else {
        Err(Error::BoundInapplicable(format!(
            "{name} = {v:e} is below the contraction threshold"
        )))
    }
}

/// `χ_z e^{-λ_z t/μ} e0 + μ χ_z (d1 + L1) / λ_z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FastBound {
    pub chi_z: f64,
    pub lambda_z: f64,
    pub mu: f64,
    pub e0: f64,
    /// `d1 + L1`.
    pub drift: f64,
}

impl FastBound {
    pub fn eval(&self, t: f64) -> f64 {
        let decay = if self.mu > 0.0 {
            (-self.lambda_z * t / self.mu).exp()
        } else if t > 0.0 {
            0.0
        } else {
            1.0
        };
        self.chi_z * decay * self.e0 + self.limit()
    }

    pub fn limit(&self) -> f64 {
        self.mu * self.chi_z * self.drift / self.lambda_z
    }
}

/// Fast-state error bound against the slow manifold.
pub fn theorem1_fast_bound(b: &BoundSet, z0_err: f64) -> Result<FastBound> {
    require_positive("lambda_z", b.lambda_z)?;
    if !(0.0..=1.0).contains(&b.mu) {
        return Err(Error::invalid(format!("mu = {} outside [0, 1]", b.mu)));
    }
    Ok(FastBound {
        chi_z: b.chi_z,
        lambda_z: b.lambda_z,
        mu: b.mu,
        e0: z0_err,
        drift: b.d1 + b.l1,
    })
}

/// Slow-state error against the reduced model:
/// `χ_x ||x0 - x_r0|| e^{-λ_x t} + μ [C1 (e^{-λ_x t} - e^{-λ_z t/μ}) + C2 (1 - e^{-λ_x t})]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlowBound {
    pub chi_x: f64,
    pub lambda_x: f64,
    pub lambda_z: f64,
    pub mu: f64,
    pub x0_err: f64,
    pub c1: f64,
    pub c2: f64,
}

impl SlowBound {
    pub fn eval(&self, t: f64) -> f64 {
        let ex = (-self.lambda_x * t).exp();
        let ez = if self.mu > 0.0 {
            (-self.lambda_z * t / self.mu).exp()
        } else if t > 0.0 {
            0.0
        } else {
            1.0
        };
        self.chi_x * self.x0_err * ex + self.mu * (self.c1 * (ex - ez) + self.c2 * (1.0 - ex))
    }

    pub fn limit(&self) -> f64 {
        self.mu * self.c2
    }
}

/// `C2 = χ_x χ_z (L2 + L_u d2)(d1 + L1) / (λ_z λ_x)`.
fn c2(b: &BoundSet) -> f64 {
    b.chi_x * b.chi_z * (b.l2 + b.l_u * b.d2) * (b.d1 + b.l1) / (b.lambda_z * b.lambda_x)
}

/// Transient slow-state bound. Refused when `λ_z - μ λ_x <= 0`, where the
/// transient constant `C1` has no valid denominator.
pub fn theorem1_slow_bound(b: &BoundSet, x0_err: f64, z0_err: f64) -> Result<SlowBound> {
    require_positive("lambda_x", b.lambda_x)?;
    require_positive("lambda_z", b.lambda_z)?;
    let gap = b.lambda_z - b.mu * b.lambda_x;
    if !(gap > 0.0) {
        return Err(Error::BoundInapplicable(format!(
            "lambda_z - mu*lambda_x = {gap:.6} is not positive"
        )));
    }
    let c1 = b.chi_x * b.chi_z * (b.l2 + b.l_u * b.d2) * z0_err / gap;
    Ok(SlowBound {
        chi_x: b.chi_x,
        lambda_x: b.lambda_x,
        lambda_z: b.lambda_z,
        mu: b.mu,
        x0_err,
        c1,
        c2: c2(b),
    })
}

/// Asymptote `μ C2` of the slow-state bound. Unlike the transient curve it
/// does not need `λ_z > μ λ_x`.
pub fn theorem1_slow_limit(b: &BoundSet) -> Result<f64> {
    require_positive("lambda_x", b.lambda_x)?;
    require_positive("lambda_z", b.lambda_z)?;
    Ok(b.mu * c2(b))
}

/// Fast error under an additive fast-time disturbance of size `d_b`:
/// `χ_z e^{-λ_z t} e0 + μ χ_z (d1 + L1 + d_b) / λ_z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisturbanceBound {
    pub chi_z: f64,
    pub lambda_z: f64,
    pub mu: f64,
    pub e0: f64,
    pub drift: f64,
}

impl DisturbanceBound {
    pub fn eval(&self, t: f64) -> f64 {
        self.chi_z * (-self.lambda_z * t).exp() * self.e0 + self.limit()
    }

    pub fn limit(&self) -> f64 {
        self.mu * self.chi_z * self.drift / self.lambda_z
    }
}

pub fn disturbance_bound(b: &BoundSet, d_b: f64, z0_err: f64) -> Result<DisturbanceBound> {
    require_positive("lambda_z", b.lambda_z)?;
    if !(d_b >= 0.0) {
        return Err(Error::invalid(format!("d_b = {d_b} must be nonnegative")));
    }
    Ok(DisturbanceBound {
        chi_z: b.chi_z,
        lambda_z: b.lambda_z,
        mu: b.mu,
        e0: z0_err,
        drift: b.d1 + b.l1 + d_b,
    })
}

/// Largest `μ` with `μ d_q <= λ_z`. Infinite when `d_q = 0`.
pub fn theorem2_mu_star(d_q: f64, lambda_z: f64) -> Result<f64> {
    require_positive("lambda_z", lambda_z)?;
    if !(d_q >= 0.0) {
        return Err(Error::invalid(format!("d_q = {d_q} must be nonnegative")));
    }
    if d_q == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(lambda_z / d_q)
}

/// [`theorem2_mu_star`] clipped to the admissible range `(0, 1]`.
pub fn theorem2_mu_star_capped(d_q: f64, lambda_z: f64) -> Result<f64> {
    Ok(theorem2_mu_star(d_q, lambda_z)?.min(1.0))
}

/// Exponential convergence of the fast error holds when `L1 = 0` and
/// `μ d_q <= λ_z`. The comparison allows `EPS_RATE` of slack for sampled
/// constants that land on the boundary.
pub fn theorem2_holds(b: &BoundSet) -> bool {
    b.lambda_z >= EPS_RATE && b.l1 == 0.0 && b.mu * b.d_q <= b.lambda_z + EPS_RATE
}

/// Fast curve plus slow curve and limits, with reasons for anything that
/// could not be produced.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCurves {
    pub fast: FastBound,
    pub slow: Option<SlowBound>,
    pub fast_limit: f64,
    pub slow_limit: Option<f64>,
    pub warnings: Vec<String>,
}

impl BoundCurves {
    pub fn new(b: &BoundSet, x0_err: f64, z0_err: f64) -> Result<Self> {
        let fast = theorem1_fast_bound(b, z0_err)?;
        let mut warnings = Vec::new();
        let slow = match theorem1_slow_bound(b, x0_err, z0_err) {
            Ok(s) => Some(s),
            Err(e) => {
                warnings.push(format!("slow transient bound: {e}"));
                None
            }
        };
        let slow_limit = match theorem1_slow_limit(b) {
            Ok(v) => Some(v),
            Err(e) => {
                warnings.push(format!("slow limit: {e}"));
                None
            }
        };
        Ok(BoundCurves {
            fast_limit: fast.limit(),
            fast,
            slow,
            slow_limit,
            warnings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> BoundSet {
        BoundSet {
            mu: 0.1,
            ..BoundSet::default()
        }
    }

    #[test]
    fn fast_bound_cases() {
        let mut b = unit();
        b.d1 = 1.5;
        b.l1 = 0.5;
        b.chi_z = 2.0;
        b.lambda_z = 4.0;
        let fb = theorem1_fast_bound(&b, 0.3).unwrap();
        assert!((fb.eval(0.0) - (2.0 * 0.3 + 0.1 * 2.0 * 2.0 / 4.0)).abs() < 1e-15);

        let fb = theorem1_fast_bound(&unit(), 1.0).unwrap();
        assert!(fb.eval(50.0) < 1e-100);

        let mut b = unit();
        b.d1 = 2.0;
        let fb = theorem1_fast_bound(&b, 0.0).unwrap();
        assert!((fb.eval(0.0) - 0.2).abs() < 1e-15 && (fb.eval(3.0) - 0.2).abs() < 1e-15);

        b.lambda_z = 0.0;
        assert!(matches!(
            theorem1_fast_bound(&b, 0.0),
            Err(Error::BoundInapplicable(_))
        ));
    }

    #[test]
    fn slow_bound_cases() {
        let mut b = unit();
        b.l2 = 1.0;
        b.d1 = 2.0;
        assert!((theorem1_slow_limit(&b).unwrap() - 0.2).abs() < 1e-15);
        let sb = theorem1_slow_bound(&b, 0.0, 0.0).unwrap();
        assert!((sb.limit() - 0.2).abs() < 1e-15);
        assert_eq!(sb.eval(0.0), 0.0);

        let mut z = unit();
        z.l2 = 3.0;
        let sb = theorem1_slow_bound(&z, 0.0, 0.0).unwrap();
        assert!((0..50).all(|i| sb.eval(i as f64 * 0.1) == 0.0));

        b.mu = 0.0;
        assert_eq!(theorem1_slow_limit(&b).unwrap(), 0.0);

        let mut b = unit();
        b.mu = 1.0;
        b.lambda_x = 2.0;
        assert!(matches!(
            theorem1_slow_bound(&b, 0.0, 1.0),
            Err(Error::BoundInapplicable(_))
        ));
        assert!(theorem1_slow_limit(&b).is_ok());
        let curves = BoundCurves::new(&b, 0.0, 1.0).unwrap();
        assert!(curves.slow.is_none() && curves.slow_limit.is_some());
        assert_eq!(curves.warnings.len(), 1);
    }

    #[test]
    fn disturbance_cases() {
        let mut b = unit();
        b.d1 = 0.7;
        let d = disturbance_bound(&b, 0.0, 1.0).unwrap();
        assert_eq!(d.limit(), theorem1_fast_bound(&b, 1.0).unwrap().limit());
        let b = unit();
        assert!((disturbance_bound(&b, 1.0, 0.0).unwrap().limit() - 0.1).abs() < 1e-15);
        let a = disturbance_bound(&b, 1.0, 0.0).unwrap().limit();
        let c = disturbance_bound(&b, 2.0, 0.0).unwrap().limit();
        assert!((c - 2.0 * a).abs() < 1e-15);
    }

    #[test]
    fn mu_star_cases() {
        assert_eq!(theorem2_mu_star(4.0, 2.0).unwrap(), 0.5);
        assert_eq!(theorem2_mu_star(0.0, 2.0).unwrap(), f64::INFINITY);
        assert_eq!(theorem2_mu_star(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(theorem2_mu_star_capped(0.5, 1.0).unwrap(), 1.0);
        assert!(theorem2_mu_star(1.0, 0.0).is_err());
    }
}
