//! Grid certification of contraction in a given metric.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::BoxRegion;
use crate::numerics::{condition_number, jacobian_fd, sym_eig, Matrix};
use crate::par::{try_map_ordered, Execution};

/// Rates with magnitude below this are reported as semi-contracting.
pub const EPS_RATE: f64 = 1e-9;
/// Smallest admissible eigenvalue of `M` at a sample.
pub const EPS_PD: f64 = 1e-9;
pub const DEFAULT_PER_AXIS: usize = 21;

pub type ThetaMap = Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>;
/// `(x, xdot) -> dΘ/dt` along the flow.
pub type ThetaDotMap = Arc<dyn Fn(&[f64], &[f64]) -> Matrix + Send + Sync>;

/// Contraction metric `M = ΘᵀΘ`.
#[derive(Clone)]
pub enum Metric {
    Constant {
        theta: Matrix,
    },
    StateDependent {
        theta: ThetaMap,
        theta_dot: ThetaDotMap,
    },
}

impl fmt::Debug for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Constant { theta } => f.debug_struct("Constant").field("theta", theta).finish(),
            Metric::StateDependent { .. } => f.write_str("StateDependent { .. }"),
        }
    }
}

impl Metric {
    pub fn identity(n: usize) -> Self {
        Metric::Constant {
            theta: Matrix::identity(n),
        }
    }

    pub fn from_theta(theta: Matrix) -> Result<Self> {
        condition_number(&theta)?;
        Ok(Metric::Constant { theta })
    }

    /// Constant metric with `Θ = Lᵀ` where `M = L Lᵀ`.
    pub fn from_m(m: &Matrix) -> Result<Self> {
        let l = m.cholesky()?;
        Ok(Metric::Constant {
            theta: l.transpose(),
        })
    }

    pub fn state_dependent(theta: ThetaMap, theta_dot: ThetaDotMap) -> Self {
        Metric::StateDependent { theta, theta_dot }
    }

    pub fn theta(&self, x: &[f64]) -> Matrix {
        match self {
            Metric::Constant { theta } => theta.clone(),
            Metric::StateDependent { theta, .. } => theta(x),
        }
    }

    pub fn theta_dot(&self, x: &[f64], xdot: &[f64]) -> Matrix {
        match self {
            Metric::Constant { theta } => Matrix::zeros(theta.rows(), theta.cols()),
            Metric::StateDependent { theta_dot, .. } => theta_dot(x, xdot),
        }
    }

    pub fn m(&self, x: &[f64]) -> Matrix {
        let t = self.theta(x);
        &t.transpose() * &t
    }

    /// `Ṁ = Θ̇ᵀΘ + ΘᵀΘ̇`.
    pub fn m_dot(&self, x: &[f64], xdot: &[f64]) -> Matrix {
        match self {
            Metric::Constant { theta } => Matrix::zeros(theta.rows(), theta.cols()),
            Metric::StateDependent { .. } => {
                let t = self.theta(x);
                let td = self.theta_dot(x, xdot);
                &(&td.transpose() * &t) + &(&t.transpose() * &td)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Metric::Constant { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Contracting,
    SemiContracting,
    NotContracting,
}

impl Verdict {
    pub fn from_rate(rate: f64) -> Self {
        if rate >= EPS_RATE {
            Verdict::Contracting
        } else if rate.abs() < EPS_RATE {
            Verdict::SemiContracting
        } else {
            Verdict::NotContracting
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Contracting => "contracting",
            Verdict::SemiContracting => "semi-contracting",
            Verdict::NotContracting => "not-contracting",
        })
    }
}

/// Outcome of a sampled contraction check.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionReport {
    pub verdict: Verdict,
    /// Minimum over samples of the pointwise rate.
    pub rate: f64,
    /// Sample attaining the minimum (first in grid order on ties). For
    /// partial checks this is the target coordinates followed by the frozen
    /// ones.
    pub worst_point: Vec<f64>,
    /// Largest eigenvalue of `M^{-1/2}(Ṁ + MJ + JᵀM)M^{-1/2}` over samples.
    pub worst_eig: f64,
    pub samples: usize,
    /// Condition number of Θ (maximum over samples for state-dependent
    /// metrics).
    pub metric_chi: f64,
}

impl ContractionReport {
    pub fn is_contracting(&self) -> bool {
        self.verdict == Verdict::Contracting
    }
}

/// `F = (Θ̇ + ΘJ)Θ⁻¹`.
pub fn generalized_jacobian(jac: &Matrix, theta: &Matrix, theta_dot: &Matrix) -> Result<Matrix> {
    if !theta.is_square() || theta.rows() != jac.rows() || !jac.is_square() {
        return Err(Error::DimensionMismatch {
            expected: jac.rows(),
            found: theta.rows(),
        });
    }
    condition_number(theta)?;
    let inv = theta.inverse()?;
    let inner = theta_dot + &(theta * jac);
    Ok(&inner * &inv)
}

struct Sample {
    rate: f64,
    chi: f64,
}

// Pointwise rate -½ λmax(M^{-1/2} S M^{-1/2}) with S = Ṁ + MJ + JᵀM.
fn sample_rate(
    jac: &Matrix,
    x: &[f64],
    xdot: &[f64],
    metric: &Metric,
    point: &[f64],
) -> Result<Sample> {
    let theta = metric.theta(x);
    if theta.rows() != jac.rows() {
        return Err(Error::DimensionMismatch {
            expected: jac.rows(),
            found: theta.rows(),
        });
    }
    let m = &theta.transpose() * &theta;
    let me = sym_eig(&m.sym_part())?;
    if !(me.min() >= EPS_PD) {
        return Err(Error::MetricNotPositive {
            point: point.to_vec(),
            min_eig: me.min(),
        });
    }
    let mj = &m * jac;
    let s = &(&metric.m_dot(x, xdot) + &mj) + &mj.transpose();
    let w = me.map_spectrum(|l| 1.0 / l.sqrt());
    let t = &(&w * &s.sym_part()) * &w;
    let top = sym_eig(&t.sym_part())?.max();
    if !top.is_finite() {
        return Err(Error::NonFinite {
            what: format!("contraction form at {point:?}"),
            axis: 0,
        });
    }
    let chi = if metric.is_constant() {
        1.0
    } else {
        (me.max() / me.min()).sqrt()
    };
    Ok(Sample {
        rate: -0.5 * top,
        chi,
    })
}

fn reduce(
    samples: Vec<Sample>,
    points: Vec<Vec<f64>>,
    metric: &Metric,
) -> Result<ContractionReport> {
    let mut best = 0;
    for (i, s) in samples.iter().enumerate() {
        if s.rate < samples[best].rate {
            best = i;
        }
    }
    let rate = samples[best].rate;
    let metric_chi = match metric {
        Metric::Constant { theta } => condition_number(theta)?,
        Metric::StateDependent { .. } => samples.iter().fold(1.0f64, |m, s| m.max(s.chi)),
    };
    Ok(ContractionReport {
        verdict: Verdict::from_rate(rate),
        rate,
        worst_point: points[best].clone(),
        worst_eig: -2.0 * rate,
        samples: samples.len(),
        metric_chi,
    })
}

/// Sampled check of `Ṁ + MJ + JᵀM ≤ -2λM` over `region`, Jacobian by
/// central differences.
pub fn check_region<F>(
    field: F,
    region: &BoxRegion,
    metric: &Metric,
    per_axis: usize,
) -> Result<ContractionReport>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
{
    check_region_with(field, region, metric, per_axis, Execution::default())
}

pub fn check_region_with<F>(
    field: F,
    region: &BoxRegion,
    metric: &Metric,
    per_axis: usize,
    exec: Execution,
) -> Result<ContractionReport>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
{
    let points = region.grid(per_axis)?;
    let samples = try_map_ordered(exec, &points, |p| {
        let jac = jacobian_fd(&field, p, None)?;
        let xdot = if metric.is_constant() {
            Vec::new()
        } else {
            field(p)
        };
        sample_rate(&jac, p, &xdot, metric, p)
    })?;
    reduce(samples, points, metric)
}

/// As [`check_region`] with an analytic Jacobian. `field` is only consulted
/// for `Ṁ` of state-dependent metrics.
pub fn check_region_jac<F, J>(
    field: F,
    jac: J,
    region: &BoxRegion,
    metric: &Metric,
    per_axis: usize,
    exec: Execution,
) -> Result<ContractionReport>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
    J: Fn(&[f64]) -> Matrix + Sync + Send,
{
    let points = region.grid(per_axis)?;
    let samples = try_map_ordered(exec, &points, |p| {
        let xdot = if metric.is_constant() {
            Vec::new()
        } else {
            field(p)
        };
        sample_rate(&jac(p), p, &xdot, metric, p)
    })?;
    reduce(samples, points, metric)
}

/// Contraction of `x' = field(x, y)` in `x` for every frozen `y` on the
/// grid of `frozen_region`. The rate is the minimum over the joint grid.
pub fn partial_contraction_check<F>(
    field: F,
    target_region: &BoxRegion,
    frozen_region: &BoxRegion,
    metric: &Metric,
    per_axis: usize,
) -> Result<ContractionReport>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64> + Sync + Send,
{
    partial_contraction_check_with(
        field,
        target_region,
        frozen_region,
        metric,
        per_axis,
        Execution::default(),
    )
}

pub fn partial_contraction_check_with<F>(
    field: F,
    target_region: &BoxRegion,
    frozen_region: &BoxRegion,
    metric: &Metric,
    per_axis: usize,
    exec: Execution,
) -> Result<ContractionReport>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64> + Sync + Send,
{
    let nt = target_region.dim();
    let joint = target_region.product(frozen_region);
    let points = joint.grid(per_axis)?;
    let samples = try_map_ordered(exec, &points, |p| {
        let (x, y) = p.split_at(nt);
        let jac = jacobian_fd(|v| field(v, y), x, None)?;
        let xdot = if metric.is_constant() {
            Vec::new()
        } else {
            field(x, y)
        };
        sample_rate(&jac, x, &xdot, metric, p)
    })?;
    reduce(samples, points, metric)
}

/// Limit of the distance between perturbed and unperturbed solutions,
/// `χ d / λ`.
pub fn robustness_bound(chi: f64, d: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::BoundInapplicable(format!(
            "contraction rate {lambda} is not positive"
        )));
    }
    if !(chi >= 1.0 - 1e-12) || !(d >= 0.0) {
        return Err(Error::invalid(format!(
            "need chi >= 1 and d >= 0, got chi = {chi}, d = {d}"
        )));
    }
    Ok(chi * d / lambda)
}

/// True when the induced 2-norm of the disturbance Jacobian stays at or
/// below `lambda` on every grid sample.
pub fn vanishing_perturbation_check<J>(
    jac_of_disturbance: J,
    region: &BoxRegion,
    lambda: f64,
    per_axis: usize,
) -> Result<bool>
where
    J: Fn(&[f64]) -> Matrix + Sync + Send,
{
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda must be positive"));
    }
    let points = region.grid(per_axis)?;
    let norms = try_map_ordered(Execution::default(), &points, |p| {
        let j = jac_of_disturbance(p);
        let e = sym_eig(&(&j.transpose() * &j))?;
        Ok::<f64, Error>(e.max().max(0.0).sqrt())
    })?;
    Ok(norms.iter().all(|&n| n <= lambda))
}
