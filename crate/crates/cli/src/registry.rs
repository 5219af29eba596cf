//! Built-in examples. Each one ships as an `.sps` file and as native
//! closures; the two must agree to the last bit.

use std::sync::Arc;

use contrakit::composite::{Manifold, StandardDesign};
use contrakit::highgain::{HighGainDesign, StrictFeedbackChain};
use contrakit::model::{BoxRegion, ControlLaw, TwoTimescaleSystem};
use contrakit::nonstandard::{build_error_system, NonstandardDesign, Reference};
use contrakit::numerics::Matrix;
use contrakit::sysdsl::{rational_pow, Expr};
use contrakit::Result;

/// Rated speed constant of the motor, rad/s.
pub const OMEGA0: f64 = 25.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Standard,
    Nonstandard,
    HighGain,
}

/// Constants of the composite-Lyapunov comparison design.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaselineConstants {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

#[derive(Clone, Debug)]
pub struct ExampleEntry {
    pub id: &'static str,
    pub description: &'static str,
    pub kind: Kind,
    pub source: &'static str,
    /// `x0` followed by `z0`.
    pub init: &'static [f64],
    /// Default `mu`, or `k` for the high-gain chain.
    pub param: f64,
    pub t_end: f64,
    pub baseline: Option<BaselineConstants>,
}

impl ExampleEntry {
    pub fn uses_gain(&self) -> bool {
        self.kind == Kind::HighGain
    }
}

pub const MOTIVATING_SPS: &str = include_str!("../systems/motivating.sps");
pub const DCMOTOR_SPS: &str = include_str!("../systems/dcmotor.sps");
pub const NONSTANDARD_SPS: &str = include_str!("../systems/nonstandard.sps");
pub const HIGHGAIN_SPS: &str = include_str!("../systems/highgain.sps");

pub fn entries() -> Vec<ExampleEntry> {
    vec![
        ExampleEntry {
            id: "motivating",
            description: "x' = x z^3, mu z' = z + u with composite control",
            kind: Kind::Standard,
            source: MOTIVATING_SPS,
            init: &[0.9, 0.4],
            param: 0.5,
            t_end: 40.0,
            baseline: Some(BaselineConstants {
                alpha1: 1.0,
                alpha2: 2.0,
                beta1: 7.0 / 4.0,
                beta2: 4.0 / 3.0,
                beta3: 7.0 / 3.0,
            }),
        },
        ExampleEntry {
            id: "dcmotor",
            description: "DC motor speed regulation to x = 1",
            kind: Kind::Standard,
            source: DCMOTOR_SPS,
            init: &[0.0, 0.0],
            param: 0.1,
            t_end: 5.0,
            baseline: None,
        },
        ExampleEntry {
            id: "nonstandard",
            description: "x' = tan z - u, mu z' = x + u regulated to the origin",
            kind: Kind::Nonstandard,
            source: NONSTANDARD_SPS,
            init: &[0.5, 0.0],
            param: 0.2,
            t_end: 10.0,
            baseline: None,
        },
        ExampleEntry {
            id: "highgain",
            description:
                "chain x' = x^2 + z1 + x z2, z1' = x sin z2 + z2, z2' = u under high-gain scaling",
            kind: Kind::HighGain,
            source: HIGHGAIN_SPS,
            init: &[-1.0, 1.0, 0.0],
            param: 10.0,
            t_end: 10.0,
            baseline: None,
        },
    ]
}

pub fn find(id: &str) -> Option<ExampleEntry> {
    entries().into_iter().find(|e| e.id == id)
}

fn cube(lo: f64, hi: f64) -> BoxRegion {
    BoxRegion::cube(1, lo, hi).expect("valid interval")
}

/// Open-loop system coded natively, at the given `mu`.
pub fn native_system(id: &str, mu: f64) -> Result<TwoTimescaleSystem> {
    match id {
        "motivating" => TwoTimescaleSystem::new(
            "motivating",
            Arc::new(|x, z, _u| vec![x[0] * rational_pow(z[0], 3, 1)]),
            Arc::new(|_x, z, _mu, u| vec![z[0] + u]),
            mu,
            cube(-1.0, 1.0),
            cube(-1.0, 1.0),
        ),
        "dcmotor" => TwoTimescaleSystem::new(
            "dcmotor",
            Arc::new(|x, z, _u| vec![-6.39 * x[0] + 6.39 * rational_pow(z[0], 2, 1)]),
            Arc::new(|x, z, mu, u| {
                vec![-z[0] - mu * OMEGA0 * x[0] * z[0] + (1.0 + mu * OMEGA0) * u]
            }),
            mu,
            cube(0.0, 2.0),
            cube(0.0, 2.0),
        ),
        "nonstandard" => TwoTimescaleSystem::new(
            "nonstandard",
            Arc::new(|_x, z, u| vec![z[0].tan() - u]),
            Arc::new(|x, _z, _mu, u| vec![x[0] + u]),
            mu,
            cube(-1.0, 1.0),
            cube(-1.0, 1.0),
        ),
        "highgain" => TwoTimescaleSystem::new(
            "highgain",
            Arc::new(|x, z, _u| vec![rational_pow(x[0], 2, 1) + z[0] + x[0] * z[1]]),
            Arc::new(|x, z, _mu, u| vec![x[0] * z[1].sin() + z[1], u]),
            mu,
            cube(-1.0, 1.0),
            BoxRegion::from_intervals(&[(-1.0, 1.0), (-6.0, 6.0)]).expect("valid intervals"),
        ),
        other => Err(contrakit::Error::InvalidInput(format!(
            "unknown example '{other}'"
        ))),
    }
}

/// Composite design for the standard examples, rebuilt for each `mu`
/// because the motor's fast control gain depends on it.
pub fn standard_design(id: &str, mu: f64) -> Result<StandardDesign> {
    let system = native_system(id, mu)?;
    let (control, manifold) = match id {
        "motivating" => (
            ControlLaw::new(
                Arc::new(|x| rational_pow(x[0], 4, 3)),
                Arc::new(|x, z| -3.0 * (z[0] + rational_pow(x[0], 4, 3))),
            ),
            Manifold::Analytic(Arc::new(|x| vec![-rational_pow(x[0], 4, 3)])),
        ),
        "dcmotor" => (
            ControlLaw::new(
                Arc::new(|_x| 1.0),
                Arc::new(move |x, z| mu * OMEGA0 / (1.0 + mu * OMEGA0) * (x[0] * z[0] - x[0])),
            ),
            Manifold::Analytic(Arc::new(|_x| vec![1.0])),
        ),
        other => {
            return Err(contrakit::Error::InvalidInput(format!(
                "'{other}' is not a standard example"
            )))
        }
    };
    Ok(StandardDesign::new(system, control, manifold))
}

/// Regulator `u = -x - z + atan(-2x)` with virtual manifold `z = atan(-2x)`.
pub fn nonstandard_design(mu: f64) -> Result<NonstandardDesign> {
    let system = native_system("nonstandard", mu)?;
    let error = build_error_system(system, Reference::constant(vec![0.0]));
    Ok(NonstandardDesign::new(
        error,
        Arc::new(|e, xr, _| vec![(-2.0 * (e[0] + xr[0])).atan()]),
        Arc::new(|e, xr, _| {
            let x = e[0] + xr[0];
            let d = -2.0 / (1.0 + 4.0 * x * x);
            (Matrix::diag(&[d]), Matrix::diag(&[d]))
        }),
        Arc::new(|ez, e, xr| -(e[0] + xr[0]) - ez[0]),
    ))
}

pub fn highgain_chain() -> Result<StrictFeedbackChain> {
    StrictFeedbackChain::new(
        1,
        vec![Expr::Const(0.0), Expr::Const(0.0)],
        vec![1.0, 1.0],
        Arc::new(|x, z| vec![x[0] * z[1].sin(), 0.0]),
        Arc::new(|x, z| vec![rational_pow(x[0], 2, 1) + z[0] + x[0] * z[1]]),
    )
}

/// Design with `a = (2, 2)` and `rho(eta) = -eta^2/k - eta`.
pub fn highgain_design(chain: &StrictFeedbackChain, k: f64) -> Result<HighGainDesign> {
    HighGainDesign::new(
        chain,
        k,
        vec![2.0, 2.0],
        Arc::new(move |e| -e[0] * e[0] / k - e[0]),
    )
}

/// Region in `(eta, xi)` coordinates covering the original design region.
/// The transform is the identity on `z` here, so the box scales exactly.
pub fn highgain_scaled_region(k: f64) -> BoxRegion {
    BoxRegion::from_intervals(&[(-k, k), (-k, k), (-6.0, 6.0)]).expect("valid intervals")
}
