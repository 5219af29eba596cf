//! Composite control `u = u1(x) + u2(x, z)` for standard two-time-scale
//! models: slow manifolds, bound constants and closed-loop simulation.

mod baseline;
mod bounds;

use std::fmt;

pub use baseline::{composite_mu, mu_max_composite_lyapunov, BaselineResult};
pub use bounds::{
    disturbance_bound, theorem1_fast_bound, theorem1_slow_bound, theorem1_slow_limit,
    theorem2_holds, theorem2_mu_star, theorem2_mu_star_capped, BoundCurves, DisturbanceBound,
    FastBound, SlowBound,
};

use crate::contraction::{
    check_region_with, partial_contraction_check_with, ContractionReport, Metric,
};
use crate::error::{Error, Result};
use crate::model::{
    norm2, norm2_diff, BoundSet, ControlLaw, Trajectory, TwoTimescaleSystem, VectorMap,
};
use crate::numerics::{
    jacobian_fd, newton_root, rk4_integrate, rk4_integrate_recording, DEFAULT_MAX_ITER,
};
use crate::par::{try_map_ordered, Execution};

/// Tolerance on `||g(x, z_ds, 0, u1)||` for manifold roots.
pub const MANIFOLD_TOL: f64 = 1e-10;

/// Largest admissible step relative to `mu`.
pub fn max_step(mu: f64) -> f64 {
    mu / 50.0
}

/// Rejects `dt > mu/50`.
pub fn check_step(dt: f64, mu: f64) -> Result<()> {
    let max_dt = max_step(mu);
    if !(dt > 0.0) || dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, max_dt });
    }
    Ok(())
}

/// Default step `min(mu/50, t_end/10000)`.
pub fn auto_step(mu: f64, t_end: f64) -> f64 {
    max_step(mu).min(t_end / 10000.0)
}

/// Root `z` of `g(x, z, 0, u1(x)) = 0` by Newton iteration from `seed`, or
/// from the centre of the fast region.
pub fn solve_manifold(
    system: &TwoTimescaleSystem,
    u1: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    seed: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let u = u1(x);
    let start = seed
        .map(|s| s.to_vec())
        .unwrap_or_else(|| system.fast_region.center());
    newton_root(
        |z| system.fast(x, z, 0.0, u),
        &start,
        MANIFOLD_TOL,
        DEFAULT_MAX_ITER,
    )
    .map_err(|e| Error::NoRoot {
        x: x.to_vec(),
        reason: e.to_string(),
    })
}

/// How the slow manifold `z_ds(x)` is obtained.
#[derive(Clone)]
pub enum Manifold {
    Analytic(VectorMap),
    Newton,
}

impl fmt::Debug for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Manifold::Analytic(_) => "Analytic",
            Manifold::Newton => "Newton",
        })
    }
}

/// A standard model with its composite controller and contraction metrics.
#[derive(Clone, Debug)]
pub struct StandardDesign {
    pub system: TwoTimescaleSystem,
    pub control: ControlLaw,
    pub manifold: Manifold,
    pub slow_metric: Metric,
    pub fast_metric: Metric,
}

impl StandardDesign {
    /// Design with identity metrics.
    pub fn new(system: TwoTimescaleSystem, control: ControlLaw, manifold: Manifold) -> Self {
        let (n, m) = (system.n, system.m);
        StandardDesign {
            system,
            control,
            manifold,
            slow_metric: Metric::identity(n),
            fast_metric: Metric::identity(m),
        }
    }

    pub fn with_metrics(mut self, slow: Metric, fast: Metric) -> Self {
        self.slow_metric = slow;
        self.fast_metric = fast;
        self
    }

    /// Same design at another `mu`. The control law is reused unchanged, so
    /// laws whose gains depend on `mu` must be rebuilt instead.
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        let mut d = self.clone();
        d.system = self.system.with_mu(mu)?;
        Ok(d)
    }

    pub fn mu(&self) -> f64 {
        self.system.mu
    }

    /// `z_ds(x)`.
    pub fn manifold_at(&self, x: &[f64], seed: Option<&[f64]>) -> Result<Vec<f64>> {
        match &self.manifold {
            Manifold::Analytic(h) => Ok(h(x)),
            Manifold::Newton => solve_manifold(&self.system, &*self.control.u1, x, seed),
        }
    }

    pub fn input(&self, x: &[f64], z: &[f64]) -> f64 {
        self.control.eval(x, z)
    }

    /// Closed-loop fast field `g(x, z, mu, u1(x) + u2(x, z))`.
    pub fn closed_fast(&self, x: &[f64], z: &[f64], mu: f64) -> Vec<f64> {
        self.system.fast(x, z, mu, self.input(x, z))
    }

    pub fn closed_slow(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        self.system.slow(x, z, self.input(x, z))
    }

    /// Reduced slow field `f(x, z_ds(x), u(x, z_ds(x)))`.
    pub fn reduced(&self, x: &[f64]) -> Result<Vec<f64>> {
        let h = self.manifold_at(x, None)?;
        Ok(self.closed_slow(x, &h))
    }

    /// Largest root residual and largest `|u2|` on the manifold over the
    /// slow grid.
    pub fn validate(&self, per_axis: usize) -> Result<(f64, f64)> {
        let mut residual: f64 = 0.0;
        let mut u2_max: f64 = 0.0;
        for x in self.system.slow_region.grid(per_axis)? {
            let h = self.manifold_at(&x, None)?;
            residual = residual.max(norm2(&self.closed_fast(&x, &h, 0.0)));
            u2_max = u2_max.max((self.control.u2)(&x, &h).abs());
        }
        if residual > 1e-8 || u2_max > 1e-8 {
            return Err(Error::invalid(format!(
                "manifold check failed: root residual {residual:e}, |u2| on manifold {u2_max:e}"
            )));
        }
        Ok((residual, u2_max))
    }
}

/// Bound constants together with the contraction reports they came from.
#[derive(Clone, Debug)]
pub struct ConstantsReport {
    pub bounds: BoundSet,
    pub slow: ContractionReport,
    pub fast: ContractionReport,
}

#[derive(Default)]
struct Sups {
    l1: f64,
    l2: f64,
    l_u: f64,
    d1: f64,
    d_q: f64,
}

fn check_finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            what: format!("sampled constant {name}"),
            axis: 0,
        })
    }
}

/// Grid suprema of every constant over `slow_region × fast_region`, plus the
/// slow (reduced) and fast contraction reports. The fast report checks the
/// closed-loop `g(x, z, mu, u)` in `z` with `x` frozen, in fast time.
pub fn estimate_constants(
    design: &StandardDesign,
    per_axis: usize,
    exec: Execution,
) -> Result<ConstantsReport> {
    let sys = &design.system;
    let n = sys.n;
    let mu = sys.mu;

    let slow = check_region_with(
        |x| design.reduced(x).unwrap_or_else(|_| vec![f64::NAN; n]),
        &sys.slow_region,
        &design.slow_metric,
        per_axis,
        exec,
    )?;
    let fast = partial_contraction_check_with(
        |z, x| design.closed_fast(x, z, mu),
        &sys.fast_region,
        &sys.slow_region,
        &design.fast_metric,
        per_axis,
        exec,
    )?;

    let xs = sys.slow_region.grid(per_axis)?;
    let manifolds = try_map_ordered(exec, &xs, |x| design.manifold_at(x, None))?;
    let zs = sys.fast_region.grid(per_axis)?;
    let pairs: Vec<(usize, usize)> = (0..xs.len())
        .flat_map(|i| (0..zs.len()).map(move |j| (i, j)))
        .collect();

    let per_point = try_map_ordered(exec, &pairs, |&(i, j)| -> Result<Sups> {
        let (x, z) = (&xs[i], &zs[j]);
        let u = design.input(x, z);
        let f = sys.slow(x, z, u);
        let dh = jacobian_fd(
            |v| {
                design
                    .manifold_at(v, Some(&manifolds[i]))
                    .unwrap_or_else(|_| vec![f64::NAN; sys.m])
            },
            x,
            None,
        )?;
        let hdot = dh.mul_vec(&f);
        let df_dz = jacobian_fd(|v| sys.slow(x, v, u), z, None)?;
        let df_du = jacobian_fd(|v| sys.slow(x, z, v[0]), &[u], None)?;
        let dq = jacobian_fd(
            |v| {
                let uv = design.input(x, v);
                dh.mul_vec(&sys.slow(x, v, uv))
            },
            z,
            None,
        )?;
        let l1 = if j == 0 && mu > 0.0 {
            let h = &manifolds[i];
            norm2_diff(
                &design.closed_fast(x, h, mu),
                &design.closed_fast(x, h, 0.0),
            ) / mu
        } else {
            0.0
        };
        Ok(Sups {
            l1,
            l2: df_dz.norm2(),
            l_u: df_du.norm2(),
            d1: norm2(&hdot),
            d_q: dq.norm2(),
        })
    })?;
    let mut s = Sups::default();
    for p in per_point {
        s.l1 = s.l1.max(p.l1);
        s.l2 = s.l2.max(p.l2);
        s.l_u = s.l_u.max(p.l_u);
        s.d1 = s.d1.max(p.d1);
        s.d_q = s.d_q.max(p.d_q);
    }
    let d2 = design.control.sampled_growth(
        &|x| design.manifold_at(x, None),
        &sys.slow_region,
        &sys.fast_region,
        per_axis,
    )?;
    let bounds = BoundSet {
        lambda_x: slow.rate,
        lambda_z: fast.rate,
        chi_x: slow.metric_chi,
        chi_z: fast.metric_chi,
        l1: check_finite("L1", s.l1)?,
        l2: check_finite("L2", s.l2)?,
        l_u: check_finite("L_u", s.l_u)?,
        d1: check_finite("d1", s.d1)?,
        d2: check_finite("d2", d2)?,
        d_b: 0.0,
        d_e: 0.0,
        d_q: check_finite("d_q", s.d_q)?,
        mu,
        per_axis,
    };
    Ok(ConstantsReport { bounds, slow, fast })
}

/// Closed-loop run with the manifold error recorded per sample.
#[derive(Clone, Debug)]
pub struct ClosedLoopRun {
    /// States are `[x, z]`.
    pub trajectory: Trajectory,
    /// `||z(t) - z_ds(x(t))||`.
    pub fast_error: Vec<f64>,
}

fn inside(design: &StandardDesign, x0: &[f64], z0: &[f64]) -> Result<()> {
    let sys = &design.system;
    if x0.len() != sys.n || z0.len() != sys.m {
        return Err(Error::DimensionMismatch {
            expected: sys.n + sys.m,
            found: x0.len() + z0.len(),
        });
    }
    if !sys.slow_region.contains(x0)? || !sys.fast_region.contains(z0)? {
        return Err(Error::invalid(format!(
            "initial state ({x0:?}, {z0:?}) lies outside the design region"
        )));
    }
    Ok(())
}

/// Integrates `x' = f`, `z' = g / mu` under `u = u1 + u2` with fixed step
/// `dt <= mu/50`.
pub fn simulate_closed_loop(
    design: &StandardDesign,
    x0: &[f64],
    z0: &[f64],
    t1: f64,
    dt: f64,
) -> Result<ClosedLoopRun> {
    let mu = design.mu();
    if !(mu > 0.0) {
        return Err(Error::invalid("closed-loop simulation needs mu > 0"));
    }
    check_step(dt, mu)?;
    inside(design, x0, z0)?;
    let n = design.system.n;
    let field = |_t: f64, s: &[f64]| {
        let (x, z) = s.split_at(n);
        let u = design.input(x, z);
        let mut d = design.system.slow(x, z, u);
        d.extend(design.system.fast(x, z, mu, u).into_iter().map(|v| v / mu));
        d
    };
    let input = |_t: f64, s: &[f64]| {
        let (x, z) = s.split_at(n);
        design.input(x, z)
    };
    let mut s0 = x0.to_vec();
    s0.extend_from_slice(z0);
    let trajectory = rk4_integrate_recording(field, input, &s0, 0.0, t1, dt)?;
    let fast_error = manifold_errors(design, &trajectory)?;
    Ok(ClosedLoopRun {
        trajectory,
        fast_error,
    })
}

// Warm-started manifold evaluation along a trajectory.
fn manifold_errors(design: &StandardDesign, traj: &Trajectory) -> Result<Vec<f64>> {
    let n = design.system.n;
    let mut seed: Option<Vec<f64>> = None;
    let mut out = Vec::with_capacity(traj.len());
    for s in &traj.states {
        let (x, z) = s.split_at(n);
        let h = design.manifold_at(x, seed.as_deref())?;
        out.push(norm2_diff(z, &h));
        seed = Some(h);
    }
    Ok(out)
}

/// Reduced model `x' = f(x, z_ds(x), u)` from `x0`.
pub fn simulate_reduced(
    design: &StandardDesign,
    x0: &[f64],
    t1: f64,
    dt: f64,
) -> Result<Trajectory> {
    let n = design.system.n;
    rk4_integrate(
        |_t, x| design.reduced(x).unwrap_or_else(|_| vec![f64::NAN; n]),
        x0,
        0.0,
        t1,
        dt,
    )
}
