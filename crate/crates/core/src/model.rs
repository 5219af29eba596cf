//! Shared value types: states, box regions, two-time-scale systems,
//! control laws, trajectories and bound constants.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Slow field `f(x, z, u)`.
pub type SlowField = Arc<dyn Fn(&[f64], &[f64], f64) -> Vec<f64> + Send + Sync>;
/// Fast field `g(x, z, mu, u)`, i.e. the right-hand side of `mu * z' = g`.
pub type FastField = Arc<dyn Fn(&[f64], &[f64], f64, f64) -> Vec<f64> + Send + Sync>;
/// Scalar map of the slow state.
pub type ScalarMap = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Scalar map of `(x, z)`.
pub type ScalarMap2 = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
/// Vector map of a single state.
pub type VectorMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A finite state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(axis) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "state vector".into(),
                axis,
            });
        }
        Ok(StateVector(entries))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for StateVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for StateVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        StateVector::new(v)
    }
}

/// Axis-aligned box `[lower, upper]`, boundary inclusive.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxRegion {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::NonFinite {
                    what: "region bound".into(),
                    axis: i,
                });
            }
            if lo > hi {
                return Err(Error::invalid(format!(
                    "region axis {i}: lower {lo} exceeds upper {hi}"
                )));
            }
        }
        Ok(BoxRegion { lower, upper })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        BoxRegion::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn from_intervals(intervals: &[(f64, f64)]) -> Result<Self> {
        BoxRegion::new(
            intervals.iter().map(|i| i.0).collect(),
            intervals.iter().map(|i| i.1).collect(),
        )
    }

    /// Zero-dimensional region (a single empty point).
    pub fn empty() -> Self {
        BoxRegion {
            lower: Vec::new(),
            upper: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn contains(&self, p: &[f64]) -> Result<bool> {
        in_region(p, self)
    }

    /// Cartesian product `self × other`.
    pub fn product(&self, other: &BoxRegion) -> BoxRegion {
        let mut lower = self.lower.clone();
        lower.extend_from_slice(&other.lower);
        let mut upper = self.upper.clone();
        upper.extend_from_slice(&other.upper);
        BoxRegion { lower, upper }
    }

    pub fn grid(&self, per_axis: usize) -> Result<Vec<Vec<f64>>> {
        grid_sample(self, per_axis)
    }
}

/// Inclusive membership test.
pub fn in_region(p: &[f64], r: &BoxRegion) -> Result<bool> {
    if p.len() != r.dim() {
        return Err(Error::DimensionMismatch {
            expected: r.dim(),
            found: p.len(),
        });
    }
    Ok(p.iter()
        .zip(r.lower.iter().zip(&r.upper))
        .all(|(v, (lo, hi))| lo <= v && v <= hi))
}

/// Uniform grid with `per_axis` points per axis, corners included.
///
/// Points are ordered lexicographically by axis index: the first axis varies
/// slowest.
pub fn grid_sample(r: &BoxRegion, per_axis: usize) -> Result<Vec<Vec<f64>>> {
    if per_axis < 2 {
        return Err(Error::invalid(format!(
            "per_axis must be at least 2 to include corners, got {per_axis}"
        )));
    }
    let dim = r.dim();
    let axes: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            let (lo, hi) = (r.lower[i], r.upper[i]);
            (0..per_axis)
                .map(|j| {
                    if j == per_axis - 1 {
                        hi
                    } else {
                        lo + (hi - lo) * j as f64 / (per_axis - 1) as f64
                    }
                })
                .collect()
        })
        .collect();
    let total = per_axis
        .checked_pow(dim as u32)
        .ok_or_else(|| Error::invalid("grid too large"))?;
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        out.push(idx.iter().enumerate().map(|(a, &j)| axes[a][j]).collect());
        for a in (0..dim).rev() {
            idx[a] += 1;
            if idx[a] < per_axis {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok(out)
}

/// `x' = f(x, z, u)`, `mu z' = g(x, z, mu, u)` on `slow_region × fast_region`.
#[derive(Clone)]
pub struct TwoTimescaleSystem {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub f: SlowField,
    pub g: FastField,
    pub mu: f64,
    pub slow_region: BoxRegion,
    pub fast_region: BoxRegion,
}

impl fmt::Debug for TwoTimescaleSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TwoTimescaleSystem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("mu", &self.mu)
            .field("slow_region", &self.slow_region)
            .field("fast_region", &self.fast_region)
            .finish_non_exhaustive()
    }
}

impl TwoTimescaleSystem {
    pub fn new(
        name: impl Into<String>,
        f: SlowField,
        g: FastField,
        mu: f64,
        slow_region: BoxRegion,
        fast_region: BoxRegion,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::invalid(format!("mu = {mu} outside [0, 1]")));
        }
        Ok(TwoTimescaleSystem {
            name: name.into(),
            n: slow_region.dim(),
            m: fast_region.dim(),
            f,
            g,
            mu,
            slow_region,
            fast_region,
        })
    }

    /// Same system with a different perturbation parameter.
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::invalid(format!("mu = {mu} outside [0, 1]")));
        }
        let mut s = self.clone();
        s.mu = mu;
        Ok(s)
    }

    pub fn slow(&self, x: &[f64], z: &[f64], u: f64) -> Vec<f64> {
        (self.f)(x, z, u)
    }

    pub fn fast(&self, x: &[f64], z: &[f64], mu: f64, u: f64) -> Vec<f64> {
        (self.g)(x, z, mu, u)
    }

    pub fn joint_region(&self) -> BoxRegion {
        self.slow_region.product(&self.fast_region)
    }
}

/// Composite control `u = u1(x) + u2(x, z)`.
#[derive(Clone)]
pub struct ControlLaw {
    pub u1: ScalarMap,
    pub u2: ScalarMap2,
}

impl fmt::Debug for ControlLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ControlLaw { .. }")
    }
}

impl ControlLaw {
    pub fn new(u1: ScalarMap, u2: ScalarMap2) -> Self {
        ControlLaw { u1, u2 }
    }

    pub fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        (self.u1)(x) + (self.u2)(x, z)
    }

    /// Largest sampled `|u2(x, z)| / ||z - h(x)||` over the joint grid,
    /// skipping points on the manifold.
    pub fn sampled_growth(
        &self,
        manifold: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
        slow_region: &BoxRegion,
        fast_region: &BoxRegion,
        per_axis: usize,
    ) -> Result<f64> {
        let xs = slow_region.grid(per_axis)?;
        let zs = fast_region.grid(per_axis)?;
        let mut worst: f64 = 0.0;
        for x in &xs {
            let h = manifold(x)?;
            for z in &zs {
                let dist = norm2_diff(z, &h);
                if dist <= 1e-12 {
                    continue;
                }
                worst = worst.max((self.u2)(x, z).abs() / dist);
            }
        }
        Ok(worst)
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn norm2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Sampled closed-loop run. `inputs[i]` is the input applied at `times[i]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<f64>,
    pub step: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.states.last().map(|s| s.as_slice())
    }

    /// Component `i` of every state.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[i]).collect()
    }

    /// Checks the structural invariants (equal lengths, increasing times).
    pub fn validate(&self) -> Result<()> {
        if self.states.len() != self.times.len() || self.inputs.len() != self.times.len() {
            return Err(Error::invalid("trajectory columns have different lengths"));
        }
        if self.step <= 0.0 {
            return Err(Error::invalid("trajectory step must be positive"));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "trajectory times are not strictly increasing",
            ));
        }
        Ok(())
    }

    /// Indices of samples with `t >= t_from`.
    pub fn window_from(&self, t_from: f64) -> impl Iterator<Item = usize> + '_ {
        self.times
            .iter()
            .enumerate()
            .filter(move |(_, &t)| t >= t_from)
            .map(|(i, _)| i)
    }
}

/// Constants entering the closed-form convergence bounds.
///
/// Rates are in 1/s; `lambda_z` is measured in the fast time scale (before
/// division by `mu`). Rates may come back non-positive from estimation when a
/// region is not certified; the bound functions reject those.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundSet {
    pub lambda_x: f64,
    pub lambda_z: f64,
    pub chi_x: f64,
    pub chi_z: f64,
    pub l1: f64,
    pub l2: f64,
    pub l_u: f64,
    pub d1: f64,
    pub d2: f64,
    pub d_b: f64,
    pub d_e: f64,
    pub d_q: f64,
    pub mu: f64,
    /// Grid resolution used for the sampled suprema.
    pub per_axis: usize,
}

impl Default for BoundSet {
    fn default() -> Self {
        BoundSet {
            lambda_x: 1.0,
            lambda_z: 1.0,
            chi_x: 1.0,
            chi_z: 1.0,
            l1: 0.0,
            l2: 0.0,
            l_u: 0.0,
            d1: 0.0,
            d2: 0.0,
            d_b: 0.0,
            d_e: 0.0,
            d_q: 0.0,
            mu: 0.1,
            per_axis: 21,
        }
    }
}

impl BoundSet {
    /// Checks the sign conventions: condition numbers at least one and every
    /// constant nonnegative. Rates are checked by the bound functions.
    pub fn validate(&self) -> Result<()> {
        if self.chi_x < 1.0 - 1e-12 || self.chi_z < 1.0 - 1e-12 {
            return Err(Error::invalid("condition numbers must be >= 1"));
        }
        let consts = [
            ("L1", self.l1),
            ("L2", self.l2),
            ("L_u", self.l_u),
            ("d1", self.d1),
            ("d2", self.d2),
            ("d_b", self.d_b),
            ("d_e", self.d_e),
            ("d_q", self.d_q),
        ];
        for (name, v) in consts {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} = {v} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }
}
