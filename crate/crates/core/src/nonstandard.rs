//! Tracking design for nonstandard models, where `g(x, z, 0, u) = 0` has no
//! isolated root. The fast state is treated as a virtual control `z_de`
//! for the error system `e = x - x_r(t)`, and `u` drives `e_z = z - z_de`
//! to zero.

use std::fmt;
use std::sync::Arc;

use crate::contraction::{
    check_region_with, partial_contraction_check_with, ContractionReport, Metric, EPS_RATE,
};
use crate::error::{Error, Result};
use crate::model::{norm2, BoundSet, BoxRegion, Trajectory, TwoTimescaleSystem};
use crate::numerics::{rk4_integrate_recording, Matrix};
use crate::par::{try_map_ordered, Execution};

/// Fraction of the run used to measure the steady error.
pub const STEADY_WINDOW: f64 = 0.1;

/// `t -> (x_r(t), x_r'(t))`, supplied analytically.
#[derive(Clone)]
pub struct Reference {
    pub x_r: Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
    pub x_r_dot: Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
}

impl Reference {
    /// Regulation to a constant point.
    pub fn constant(point: Vec<f64>) -> Self {
        let n = point.len();
        Reference {
            x_r: Arc::new(move |_| point.clone()),
            x_r_dot: Arc::new(move |_| vec![0.0; n]),
        }
    }
}

impl fmt::Debug for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Reference { .. }")
    }
}

/// The system in error coordinates `(e, z)` for a given reference.
#[derive(Clone, Debug)]
pub struct ErrorSystem {
    pub system: TwoTimescaleSystem,
    pub reference: Reference,
}

impl ErrorSystem {
    /// `e' = f(e + x_r, z, u) - x_r'`.
    pub fn slow(&self, t: f64, e: &[f64], z: &[f64], u: f64) -> Vec<f64> {
        let xr = (self.reference.x_r)(t);
        let xrd = (self.reference.x_r_dot)(t);
        let x: Vec<f64> = e.iter().zip(&xr).map(|(a, b)| a + b).collect();
        self.system
            .slow(&x, z, u)
            .into_iter()
            .zip(xrd)
            .map(|(a, b)| a - b)
            .collect()
    }

    /// `mu z' = g(e + x_r, z, mu, u)`.
    pub fn fast(&self, t: f64, e: &[f64], z: &[f64], mu: f64, u: f64) -> Vec<f64> {
        let xr = (self.reference.x_r)(t);
        let x: Vec<f64> = e.iter().zip(&xr).map(|(a, b)| a + b).collect();
        self.system.fast(&x, z, mu, u)
    }

    /// Autonomous snapshot of the error system with the reference frozen
    /// at time `t`.
    pub fn at_time(&self, t: f64) -> Result<TwoTimescaleSystem> {
        let me = self.clone();
        let me2 = self.clone();
        let xr = (self.reference.x_r)(t);
        let shifted = BoxRegion::new(
            self.system
                .slow_region
                .lower()
                .iter()
                .zip(&xr)
                .map(|(a, b)| a - b)
                .collect(),
            self.system
                .slow_region
                .upper()
                .iter()
                .zip(&xr)
                .map(|(a, b)| a - b)
                .collect(),
        )?;
        TwoTimescaleSystem::new(
            format!("{} (error coordinates)", self.system.name),
            Arc::new(move |e, z, u| me.slow(t, e, z, u)),
            Arc::new(move |e, z, mu, u| me2.fast(t, e, z, mu, u)),
            self.system.mu,
            shifted,
            self.system.fast_region.clone(),
        )
    }
}

pub fn build_error_system(system: TwoTimescaleSystem, reference: Reference) -> ErrorSystem {
    ErrorSystem { system, reference }
}

/// `(e, x_r, x_r') -> z_de`.
pub type VirtualManifold = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync>;
/// `(e, x_r, x_r') -> (∂z_de/∂e, ∂z_de/∂x_r)`.
pub type ManifoldPartials = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> (Matrix, Matrix) + Send + Sync>;
/// `(e_z, e, x_r) -> u`.
pub type TrackingLaw = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct NonstandardDesign {
    pub error: ErrorSystem,
    pub virtual_manifold: VirtualManifold,
    pub partials: ManifoldPartials,
    pub control: TrackingLaw,
    pub slow_metric: Metric,
    pub fast_metric: Metric,
}

impl fmt::Debug for NonstandardDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonstandardDesign")
            .field("system", &self.error.system)
            .finish_non_exhaustive()
    }
}

impl NonstandardDesign {
    pub fn new(
        error: ErrorSystem,
        virtual_manifold: VirtualManifold,
        partials: ManifoldPartials,
        control: TrackingLaw,
    ) -> Self {
        let (n, m) = (error.system.n, error.system.m);
        NonstandardDesign {
            error,
            virtual_manifold,
            partials,
            control,
            slow_metric: Metric::identity(n),
            fast_metric: Metric::identity(m),
        }
    }

    pub fn mu(&self) -> f64 {
        self.error.system.mu
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        let mut d = self.clone();
        d.error.system = self.error.system.with_mu(mu)?;
        Ok(d)
    }

    fn reference_at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        (
            (self.error.reference.x_r)(t),
            (self.error.reference.x_r_dot)(t),
        )
    }

    pub fn z_de(&self, t: f64, e: &[f64]) -> Vec<f64> {
        let (xr, xrd) = self.reference_at(t);
        (self.virtual_manifold)(e, &xr, &xrd)
    }

    /// Control input at `(t, e, z)`.
    pub fn input(&self, t: f64, e: &[f64], z: &[f64]) -> f64 {
        let (xr, xrd) = self.reference_at(t);
        let zde = (self.virtual_manifold)(e, &xr, &xrd);
        let ez: Vec<f64> = z.iter().zip(&zde).map(|(a, b)| a - b).collect();
        (self.control)(&ez, e, &xr)
    }

    /// `z_de'` along the closed loop from the declared partial derivatives:
    /// `∂z_de/∂e · e' + ∂z_de/∂x_r · x_r'`.
    pub fn z_de_dot(&self, t: f64, e: &[f64], z: &[f64]) -> Vec<f64> {
        let (xr, xrd) = self.reference_at(t);
        let (de, dxr) = (self.partials)(e, &xr, &xrd);
        let u = self.input(t, e, z);
        let edot = self.error.slow(t, e, z, u);
        let a = de.mul_vec(&edot);
        let b = dxr.mul_vec(&xrd);
        a.iter().zip(&b).map(|(p, q)| p + q).collect()
    }

    /// Reduced error field `f(e + x_r, z_de, u(0, e, x_r)) - x_r'`.
    pub fn reduced(&self, t: f64, e: &[f64]) -> Vec<f64> {
        let zde = self.z_de(t, e);
        let u = self.input(t, e, &zde);
        self.error.slow(t, e, &zde, u)
    }
}

/// Right-hand sides of `mu e_z' = ...` as functions of `(t, e, e_z)`.
pub struct FastErrorFields {
    /// `g(e + x_r, e_z + z_de, u) - mu z_de'`.
    pub perturbed: Box<dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync>,
    /// `g(e + x_r, e_z + z_de, u)`.
    pub unperturbed: Box<dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync>,
}

pub fn fast_error_dynamics(design: &NonstandardDesign) -> FastErrorFields {
    let unpert = {
        let d = design.clone();
        move |t: f64, e: &[f64], ez: &[f64]| {
            let zde = d.z_de(t, e);
            let z: Vec<f64> = ez.iter().zip(&zde).map(|(a, b)| a + b).collect();
            let u = d.input(t, e, &z);
            d.error.fast(t, e, &z, d.mu(), u)
        }
    };
    let pert = {
        let d = design.clone();
        let base = unpert.clone();
        move |t: f64, e: &[f64], ez: &[f64]| {
            let zde = d.z_de(t, e);
            let z: Vec<f64> = ez.iter().zip(&zde).map(|(a, b)| a + b).collect();
            let zdot = d.z_de_dot(t, e, &z);
            base(t, e, ez)
                .into_iter()
                .zip(zdot)
                .map(|(g, zd)| g - d.mu() * zd)
                .collect()
        }
    };
    FastErrorFields {
        perturbed: Box::new(pert),
        unperturbed: Box::new(unpert),
    }
}

/// Constants of the nonstandard bounds. `d_e` bounds `||z_de'||`;
/// `l_e` is the Lipschitz constant of `f` in `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct NonstandardConstants {
    pub lambda_xe: f64,
    pub lambda_ez: f64,
    pub chi_xe: f64,
    pub chi_ze: f64,
    pub l_e: f64,
    pub d_e: f64,
    pub mu: f64,
    pub per_axis: usize,
    pub slow: ContractionReport,
    pub fast: ContractionReport,
}

impl NonstandardConstants {
    /// Packs the constants into a [`BoundSet`]: `lambda_x = λ_xe`,
    /// `lambda_z = λ_ez`, `chi_x = χ_xe`, `chi_z = χ_ze`, `l2 = L_e`.
    pub fn bound_set(&self) -> BoundSet {
        BoundSet {
            lambda_x: self.lambda_xe,
            lambda_z: self.lambda_ez,
            chi_x: self.chi_xe,
            chi_z: self.chi_ze,
            l2: self.l_e,
            d_e: self.d_e,
            mu: self.mu,
            per_axis: self.per_axis,
            ..BoundSet::default()
        }
    }
}

/// Samples the constants at `t = 0` over `slow_region × fast_region`
/// (`e_z` is sampled over the fast region as well).
pub fn estimate_constants(
    design: &NonstandardDesign,
    per_axis: usize,
    exec: Execution,
) -> Result<NonstandardConstants> {
    let sys = &design.error.system;
    let err0 = design.error.at_time(0.0)?;
    let slow = check_region_with(
        |e| design.reduced(0.0, e),
        &err0.slow_region,
        &design.slow_metric,
        per_axis,
        exec,
    )?;
    let fields = fast_error_dynamics(design);
    let fast = partial_contraction_check_with(
        |ez, e| (fields.unperturbed)(0.0, e, ez),
        &sys.fast_region,
        &err0.slow_region,
        &design.fast_metric,
        per_axis,
        exec,
    )?;
    let joint = err0.slow_region.product(&sys.fast_region);
    let pts = joint.grid(per_axis)?;
    let n = sys.n;
    let sups = try_map_ordered(exec, &pts, |p| {
        let (e, z) = p.split_at(n);
        let d_e = norm2(&design.z_de_dot(0.0, e, z));
        let u = design.input(0.0, e, z);
        let l_e =
            crate::numerics::jacobian_fd(|v| design.error.slow(0.0, e, v, u), z, None)?.norm2();
        Ok::<(f64, f64), Error>((d_e, l_e))
    })?;
    let (d_e, l_e) = sups
        .iter()
        .fold((0.0f64, 0.0f64), |(a, b), &(c, d)| (a.max(c), b.max(d)));
    if !d_e.is_finite() || !l_e.is_finite() {
        return Err(Error::NonFinite {
            what: "sampled constant d_e or L_e".into(),
            axis: 0,
        });
    }
    Ok(NonstandardConstants {
        lambda_xe: slow.rate,
        lambda_ez: fast.rate,
        chi_xe: slow.metric_chi,
        chi_ze: fast.metric_chi,
        l_e,
        d_e,
        mu: sys.mu,
        per_axis,
        slow,
        fast,
    })
}

/// `χ_ze e^{-λ_ez t} e0 + μ d_e χ_ze / λ_ez`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackingFastBound {
    pub chi_ze: f64,
    pub lambda_ez: f64,
    pub mu: f64,
    pub d_e: f64,
    pub e0: f64,
}

impl TrackingFastBound {
    pub fn eval(&self, t: f64) -> f64 {
        self.chi_ze * (-self.lambda_ez * t).exp() * self.e0 + self.limit()
    }

    pub fn limit(&self) -> f64 {
        self.mu * self.d_e * self.chi_ze / self.lambda_ez
    }
}

/// Bound on `||e_z - e_zu||`, reading `lambda_z`, `chi_z`, `d_e` and `mu`
/// from `b`.
pub fn theorem3_fast_bound(b: &BoundSet, e0: f64) -> Result<TrackingFastBound> {
    if !(b.lambda_z >= EPS_RATE) {
        return Err(Error::BoundInapplicable(format!(
            "lambda_ez = {} is not positive",
            b.lambda_z
        )));
    }
    Ok(TrackingFastBound {
        chi_ze: b.chi_z,
        lambda_ez: b.lambda_z,
        mu: b.mu,
        d_e: b.d_e,
        e0,
    })
}

/// How the symbols of the slow tracking limit are read from a [`BoundSet`].
pub const SLOW_LIMIT_MAPPING: [(&str, &str); 6] = [
    ("d_z", "L_e (BoundSet.l2), Lipschitz constant of f in z"),
    ("C_1", "d_e (BoundSet.d_e), bound on ||z_de'||"),
    ("chi_x", "chi_xe (BoundSet.chi_x)"),
    ("chi_z", "chi_ze (BoundSet.chi_z)"),
    ("lambda_x", "lambda_xe (BoundSet.lambda_x)"),
    ("lambda_ez", "lambda_ez (BoundSet.lambda_z)"),
];

/// `μ L_e d_e χ_xe χ_ze / (λ_xe λ_ez)` under [`SLOW_LIMIT_MAPPING`].
pub fn theorem3_slow_limit(b: &BoundSet) -> Result<f64> {
    if !(b.lambda_x >= EPS_RATE && b.lambda_z >= EPS_RATE) {
        return Err(Error::BoundInapplicable(format!(
            "need lambda_xe > 0 and lambda_ez > 0, got {} and {}",
            b.lambda_x, b.lambda_z
        )));
    }
    Ok(b.mu * b.l2 * b.d_e * b.chi_x * b.chi_z / (b.lambda_x * b.lambda_z))
}

#[derive(Clone, Debug)]
pub struct TrackingRun {
    /// States `[x, z]` in original coordinates.
    pub trajectory: Trajectory,
    /// `||e(t)||`.
    pub error: Vec<f64>,
    /// `||e_z(t)||`.
    pub fast_error: Vec<f64>,
    /// Largest `||e||` over the final window.
    pub steady_error: f64,
    /// Start time of that window.
    pub window_start: f64,
}

/// Closed loop from `x(0) = x_r(0) + e0`, `z(0) = z0`.
pub fn simulate_tracking(
    design: &NonstandardDesign,
    e0: &[f64],
    z0: &[f64],
    t1: f64,
    dt: f64,
) -> Result<TrackingRun> {
    let mu = design.mu();
    if !(mu > 0.0) {
        return Err(Error::invalid("tracking simulation needs mu > 0"));
    }
    crate::composite::check_step(dt, mu)?;
    let n = design.error.system.n;
    if e0.len() != n || z0.len() != design.error.system.m {
        return Err(Error::DimensionMismatch {
            expected: n + design.error.system.m,
            found: e0.len() + z0.len(),
        });
    }
    let err_of = |t: f64, x: &[f64]| -> Vec<f64> {
        let xr = (design.error.reference.x_r)(t);
        x.iter().zip(&xr).map(|(a, b)| a - b).collect()
    };
    let field = |t: f64, s: &[f64]| {
        let (x, z) = s.split_at(n);
        let e = err_of(t, x);
        let u = design.input(t, &e, z);
        let mut d = design.error.system.slow(x, z, u);
        d.extend(
            design
                .error
                .system
                .fast(x, z, mu, u)
                .into_iter()
                .map(|v| v / mu),
        );
        d
    };
    let input = |t: f64, s: &[f64]| {
        let (x, z) = s.split_at(n);
        design.input(t, &err_of(t, x), z)
    };
    let xr0 = (design.error.reference.x_r)(0.0);
    let mut s0: Vec<f64> = e0.iter().zip(&xr0).map(|(a, b)| a + b).collect();
    s0.extend_from_slice(z0);
    let trajectory = rk4_integrate_recording(field, input, &s0, 0.0, t1, dt)?;
    let mut error = Vec::with_capacity(trajectory.len());
    let mut fast_error = Vec::with_capacity(trajectory.len());
    for (t, s) in trajectory.times.iter().zip(&trajectory.states) {
        let (x, z) = s.split_at(n);
        let e = err_of(*t, x);
        let zde = design.z_de(*t, &e);
        error.push(norm2(&e));
        fast_error.push(norm2(
            &z.iter().zip(&zde).map(|(a, b)| a - b).collect::<Vec<_>>(),
        ));
    }
    let window_start = t1 - STEADY_WINDOW * t1;
    let steady_error = trajectory
        .window_from(window_start)
        .map(|i| error[i])
        .fold(0.0f64, f64::max);
    Ok(TrackingRun {
        trajectory,
        error,
        fast_error,
        steady_error,
        window_start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regulator(mu: f64) -> NonstandardDesign {
        let sys = TwoTimescaleSystem::new(
            "ns",
            Arc::new(|_x, z, u| vec![z[0].tan() - u]),
            Arc::new(|x, _z, _mu, u| vec![x[0] + u]),
            mu,
            BoxRegion::cube(1, -1.0, 1.0).unwrap(),
            BoxRegion::cube(1, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        let err = build_error_system(sys, Reference::constant(vec![0.0]));
        NonstandardDesign::new(
            err,
            Arc::new(|e, xr, _| vec![(-2.0 * (e[0] + xr[0])).atan()]),
            Arc::new(|e, xr, _| {
                let x = e[0] + xr[0];
                let d = -2.0 / (1.0 + 4.0 * x * x);
                (Matrix::diag(&[d]), Matrix::diag(&[d]))
            }),
            Arc::new(|ez, e, xr| -(e[0] + xr[0]) - ez[0]),
        )
    }

    #[test]
    fn error_system_cases() {
        let d = regulator(0.2);
        let snap = d.error.at_time(0.0).unwrap();
        let orig = &d.error.system;
        for p in [[0.3, -0.2], [-0.9, 0.7]] {
            assert_eq!(
                snap.slow(&p[..1], &p[1..], 0.4),
                orig.slow(&p[..1], &p[1..], 0.4)
            );
        }
        let moving = build_error_system(
            orig.clone(),
            Reference {
                x_r: Arc::new(|t: f64| vec![t.sin()]),
                x_r_dot: Arc::new(|t: f64| vec![t.cos()]),
            },
        );
        let t: f64 = 0.7;
        let got = moving.slow(t, &[0.1], &[0.2], 0.0)[0];
        assert!((got - (0.2f64.tan() - t.cos())).abs() < 1e-15);
    }

    #[test]
    fn fast_error_fields() {
        let d = regulator(0.2);
        let fields = fast_error_dynamics(&d);
        // Unperturbed part is -e_z.
        for (e, ez) in [(0.3, 0.1), (-0.5, -0.8)] {
            assert!(((fields.unperturbed)(0.0, &[e], &[ez])[0] + ez).abs() < 1e-15);
        }
        let e: f64 = 0.4;
        let ez = 0.1;
        let z = ez + (-2.0 * e).atan();
        let u = -e - ez;
        let zdot = -2.0 / (1.0 + 4.0 * e * e) * (z.tan() - u);
        let want = -ez - 0.2 * zdot;
        assert!(((fields.perturbed)(0.0, &[e], &[ez])[0] - want).abs() < 1e-14);
    }

    #[test]
    fn constants_and_bounds() {
        let d = regulator(0.2);
        let c = estimate_constants(&d, 21, Execution::default()).unwrap();
        assert!((c.lambda_xe - 1.0).abs() < 1e-6, "{}", c.lambda_xe);
        assert!((c.lambda_ez - 1.0).abs() < 1e-6);
        // Oracle: grid sup of |2/(1+4x²) (tan z - u)|.
        let mut oracle: f64 = 0.0;
        for i in 0..21 {
            for j in 0..21 {
                let x = -1.0 + 0.1 * i as f64;
                let z = -1.0 + 0.1 * j as f64;
                let u = -x - z + (-2.0 * x).atan();
                oracle = oracle.max((2.0 / (1.0 + 4.0 * x * x) * (z.tan() - u)).abs());
            }
        }
        assert!((c.d_e - oracle).abs() < 1e-9 * oracle);

        let mut b = BoundSet::default();
        b.mu = 0.2;
        b.d_e = 1.0;
        let fb = theorem3_fast_bound(&b, 0.0).unwrap();
        assert!((fb.eval(3.0) - 0.2).abs() < 1e-15);
        b.mu = 0.0;
        assert!(theorem3_fast_bound(&b, 1.0).unwrap().eval(40.0) < 1e-15);
        b.d_e = 0.0;
        assert_eq!(theorem3_fast_bound(&b, 0.0).unwrap().eval(1.0), 0.0);

        let mut b = BoundSet::default();
        b.mu = 0.2;
        b.l2 = 1.0;
        b.d_e = 1.0;
        assert!((theorem3_slow_limit(&b).unwrap() - 0.2).abs() < 1e-15);
        let full = theorem3_slow_limit(&b).unwrap();
        b.lambda_z = 0.5;
        assert!((theorem3_slow_limit(&b).unwrap() - 2.0 * full).abs() < 1e-15);
        b.mu = 0.0;
        assert_eq!(theorem3_slow_limit(&b).unwrap(), 0.0);
    }

    #[test]
    fn zero_error_stays_zero() {
        // With e = 0 and z = z_de(0) = 0 the origin is an equilibrium.
        let d = regulator(0.2);
        let run = simulate_tracking(&d, &[0.0], &[0.0], 2.0, 0.004).unwrap();
        assert!(run.error.iter().all(|&e| e == 0.0));
        assert_eq!(run.steady_error, 0.0);
    }

    #[test]
    fn regulates_near_origin() {
        let d = regulator(0.2);
        let run = simulate_tracking(&d, &[0.5], &[0.0], 10.0, 0.004).unwrap();
        assert!(run.steady_error < 1e-3, "{}", run.steady_error);
        assert!((run.window_start - 9.0).abs() < 1e-12);
    }
}
