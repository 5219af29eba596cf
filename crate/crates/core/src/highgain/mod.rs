//! High-gain design for approximately feedback linearizable chains
//!
//! ```text
//! x'   = f(x, z)
//! z_j' = g1j(z1..zj) + b_j z_{j+1} + g3j(x, z)      (z_{m+1} = u)
//! ```
//!
//! Backstepping removes the strict-feedback part, scaling by `k` turns the
//! result into a two-timescale system with `mu = 1/k`, and a companion
//! matrix `G` fixes the fast closed loop.

pub mod symbolic;

use std::fmt;
use std::sync::Arc;

use crate::contraction::EPS_RATE;
use crate::error::{Error, Result};
use crate::model::{norm2, norm2_diff, BoxRegion, ScalarMap, Trajectory};
use crate::numerics::{
    char_poly, jacobian_fd, rk4_integrate_recording, routh_table, sym_eig, Matrix,
};
use crate::par::{try_map_ordered, Execution};
use crate::sysdsl::{Compiled, Expr};

pub use symbolic::derivative;

/// `(x, z) -> vector`.
pub type ChainMap = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Names `z1..zm` used by the chain expressions.
pub fn z_symbols(m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("z{i}")).collect()
}

#[derive(Clone)]
pub struct StrictFeedbackChain {
    pub n: usize,
    pub m: usize,
    /// `g1[j]` may use `z1..z{j+1}` only.
    pub g1: Vec<Expr>,
    pub b: Vec<f64>,
    pub g3: ChainMap,
    pub slow_f: ChainMap,
    g1_compiled: Vec<Compiled>,
}

impl fmt::Debug for StrictFeedbackChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g1: Vec<String> = self.g1.iter().map(|e| e.to_string()).collect();
        f.debug_struct("StrictFeedbackChain")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("g1", &g1)
            .field("b", &self.b)
            .finish_non_exhaustive()
    }
}

impl StrictFeedbackChain {
    pub fn new(
        n: usize,
        g1: Vec<Expr>,
        b: Vec<f64>,
        g3: ChainMap,
        slow_f: ChainMap,
    ) -> Result<Self> {
        let m = g1.len();
        if m == 0 || n == 0 {
            return Err(Error::invalid("chain needs n >= 1 and m >= 1"));
        }
        if b.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: b.len(),
            });
        }
        if let Some(j) = b.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid(format!(
                "b{} = {} must be positive",
                j + 1,
                b[j]
            )));
        }
        let syms = z_symbols(m);
        let mut g1_compiled = Vec::with_capacity(m);
        for (j, e) in g1.iter().enumerate() {
            if let Some(v) = e.variables().into_iter().find(|v| !syms[..=j].contains(v)) {
                return Err(Error::invalid(format!(
                    "g1{} uses `{v}`; only z1..z{} are allowed",
                    j + 1,
                    j + 1
                )));
            }
            g1_compiled.push(
                e.compile(&syms)
                    .map_err(|v| Error::invalid(format!("unknown variable {v}")))?,
            );
        }
        let chain = StrictFeedbackChain {
            n,
            m,
            g1,
            b,
            g3,
            slow_f,
            g1_compiled,
        };
        let (x0, z0) = (vec![0.0; n], vec![0.0; m]);
        let f0 = (chain.slow_f)(&x0, &z0);
        let g0 = (chain.g3)(&x0, &z0);
        if f0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: f0.len(),
            });
        }
        if g0.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: g0.len(),
            });
        }
        if norm2(&f0) > 1e-12 || norm2(&g0) > 1e-12 {
            return Err(Error::invalid("need f(0, 0) = 0 and g3(0, 0) = 0"));
        }
        Ok(chain)
    }

    pub fn g1_at(&self, j: usize, z: &[f64]) -> f64 {
        self.g1_compiled[j].eval(z)
    }

    /// `z'` with `g3` dropped.
    pub fn nominal_zdot(&self, z: &[f64], u: f64) -> Vec<f64> {
        (0..self.m)
            .map(|j| {
                let next = if j + 1 < self.m { z[j + 1] } else { u };
                self.g1_at(j, z) + self.b[j] * next
            })
            .collect()
    }

    pub fn zdot(&self, x: &[f64], z: &[f64], u: f64) -> Vec<f64> {
        let g3 = (self.g3)(x, z);
        self.nominal_zdot(z, u)
            .into_iter()
            .zip(g3)
            .map(|(a, b)| a + b)
            .collect()
    }

    /// Sampled `c1 = sup ||f(0, z)||/||z||` and `c2 = sup ||g3(0, z)||/||z||`
    /// on the cube `|z_i| <= radius`.
    pub fn growth_constants(&self, radius: f64, per_axis: usize) -> Result<(f64, f64)> {
        let x0 = vec![0.0; self.n];
        let mut c = (0.0f64, 0.0f64);
        for z in BoxRegion::cube(self.m, -radius, radius)?.grid(per_axis)? {
            let nz = norm2(&z);
            if nz == 0.0 {
                continue;
            }
            c.0 = c.0.max(norm2(&(self.slow_f)(&x0, &z)) / nz);
            c.1 = c.1.max(norm2(&(self.g3)(&x0, &z)) / nz);
        }
        if !c.0.is_finite() || !c.1.is_finite() {
            return Err(Error::NonFinite {
                what: "growth constants".into(),
                axis: 0,
            });
        }
        Ok(c)
    }
}

/// Result of the recursive change of coordinates `xi_hat_i = z_i - alpha_i`.
#[derive(Clone, Debug)]
pub struct Backstepping {
    /// `alpha[i]` depends on `z1..zi`.
    pub alpha: Vec<Expr>,
    /// `alpha_grad[i][k] = ∂alpha_{i+1}/∂z_{k+1}` for `k < i`.
    pub alpha_grad: Vec<Vec<Expr>>,
    /// `-g1m + Σ ∂alpha_m/∂z_k z_k'`.
    pub feedforward: Expr,
    pub a: Matrix,
    pub b: Matrix,
    b_m: f64,
    alpha_c: Vec<Compiled>,
    grad_c: Vec<Vec<Compiled>>,
    ff_c: Compiled,
}

pub fn backstepping_transform(chain: &StrictFeedbackChain) -> Result<Backstepping> {
    use symbolic::{add, div, mul, neg};
    let m = chain.m;
    let syms = z_symbols(m);
    let diff = |e: &Expr, k: usize| derivative(e, &syms[k]).map_err(Error::InvalidInput);
    // Nominal z_k' for k < m, with the chain substituted.
    let zdot: Vec<Expr> = (0..m.saturating_sub(1))
        .map(|k| {
            add(
                chain.g1[k].clone(),
                mul(Expr::Const(chain.b[k]), Expr::var(&syms[k + 1])),
            )
        })
        .collect();
    let step = |prev: &Expr, g: &Expr, upto: usize| -> Result<Expr> {
        let mut s = neg(g.clone());
        for (k, zd) in zdot.iter().enumerate().take(upto) {
            s = add(s, mul(diff(prev, k)?, zd.clone()));
        }
        Ok(s)
    };
    let mut alpha = vec![Expr::Const(0.0)];
    for i in 1..m {
        let s = step(&alpha[i - 1], &chain.g1[i - 1], i - 1)?;
        alpha.push(div(s, Expr::Const(chain.b[i - 1])));
    }
    let feedforward = step(&alpha[m - 1], &chain.g1[m - 1], m - 1)?;
    let alpha_grad = (0..m)
        .map(|i| {
            (0..i)
                .map(|k| diff(&alpha[i], k))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let compile = |e: &Expr| {
        e.compile(&syms)
            .map_err(|v| Error::invalid(format!("unknown variable {v}")))
    };
    let alpha_c = alpha.iter().map(compile).collect::<Result<Vec<_>>>()?;
    let grad_c = alpha_grad
        .iter()
        .map(|row| row.iter().map(compile).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let ff_c = compile(&feedforward)?;
    let (a, b) = brunovsky(&chain.b);
    Ok(Backstepping {
        alpha,
        alpha_grad,
        feedforward,
        a,
        b,
        b_m: chain.b[m - 1],
        alpha_c,
        grad_c,
        ff_c,
    })
}

/// `A` with superdiagonal `b_1..b_{m-1}` and `B = e_m`.
fn brunovsky(b: &[f64]) -> (Matrix, Matrix) {
    let m = b.len();
    let mut a = Matrix::zeros(m, m);
    for i in 0..m - 1 {
        a[(i, i + 1)] = b[i];
    }
    let mut bb = Matrix::zeros(m, 1);
    bb[(m - 1, 0)] = 1.0;
    (a, bb)
}

impl Backstepping {
    pub fn m(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha_at(&self, z: &[f64]) -> Vec<f64> {
        self.alpha_c.iter().map(|c| c.eval(z)).collect()
    }

    pub fn xi_hat(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(self.alpha_at(z)).map(|(a, b)| a - b).collect()
    }

    /// Inverse of [`xi_hat`](Self::xi_hat), solved forward along the chain.
    pub fn z_from_xi_hat(&self, xi_hat: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; xi_hat.len()];
        for i in 0..z.len() {
            z[i] = xi_hat[i] + self.alpha_c[i].eval(&z);
        }
        z
    }

    /// `∂alpha/∂z`, strictly lower triangular.
    pub fn alpha_jacobian(&self, z: &[f64]) -> Matrix {
        let m = self.m();
        let mut j = Matrix::zeros(m, m);
        for (i, row) in self.grad_c.iter().enumerate() {
            for (k, c) in row.iter().enumerate() {
                j[(i, k)] = c.eval(z);
            }
        }
        j
    }

    /// `u = (feedforward(z) + u1) / b_m`.
    pub fn input(&self, z: &[f64], u1: f64) -> f64 {
        (self.ff_c.eval(z) + u1) / self.b_m
    }

    /// `||xi_hat' - (A xi_hat + B u1)||` for the chain without `g3`.
    pub fn residual(&self, chain: &StrictFeedbackChain, z: &[f64], u1: f64) -> f64 {
        let zd = chain.nominal_zdot(z, self.input(z, u1));
        let jzd = self.alpha_jacobian(z).mul_vec(&zd);
        let xh_dot: Vec<f64> = zd.iter().zip(&jzd).map(|(a, b)| a - b).collect();
        let mut target = self.a.mul_vec(&self.xi_hat(z));
        target[self.m() - 1] += u1;
        norm2_diff(&xh_dot, &target)
    }
}

/// `diag(k^{m-1}, ..., k, 1)`.
pub fn scaling_matrix(k: f64, m: usize) -> Matrix {
    let d: Vec<f64> = (0..m).map(|i| k.powi((m - 1 - i) as i32)).collect();
    Matrix::diag(&d)
}

/// `eta = k^{m-1} x`, `xi = K xi_hat`. Requires `k > 0`.
pub fn scale_states(k: f64, x: &[f64], xi_hat: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = xi_hat.len();
    let kx = k.powi(m as i32 - 1);
    let eta = x.iter().map(|v| v * kx).collect();
    let xi = xi_hat
        .iter()
        .enumerate()
        .map(|(i, v)| v * k.powi((m - 1 - i) as i32))
        .collect();
    (eta, xi)
}

pub fn unscale_states(k: f64, eta: &[f64], xi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = xi.len();
    let kx = k.powi(m as i32 - 1);
    let x = eta.iter().map(|v| v / kx).collect();
    let xi_hat = xi
        .iter()
        .enumerate()
        .map(|(i, v)| v / k.powi((m - 1 - i) as i32))
        .collect();
    (x, xi_hat)
}

/// Companion matrix with superdiagonal `b_1..b_{m-1}` and last row
/// `-a_1..-a_m`. Only the first `m - 1` entries of `b` are read. Rejected
/// unless its characteristic polynomial passes the Routh test.
pub fn companion_matrix(a: &[f64], b: &[f64]) -> Result<Matrix> {
    let m = a.len();
    if m == 0 {
        return Err(Error::invalid(
            "companion matrix needs at least one coefficient",
        ));
    }
    if b.len() + 1 < m {
        return Err(Error::DimensionMismatch {
            expected: m - 1,
            found: b.len(),
        });
    }
    if let Some(j) = b[..m - 1].iter().position(|v| !(*v > 0.0)) {
        return Err(Error::invalid(format!(
            "b{} = {} must be positive",
            j + 1,
            b[j]
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "companion coefficients".into(),
            axis: a.iter().position(|v| !v.is_finite()).unwrap_or(0),
        });
    }
    let mut g = Matrix::zeros(m, m);
    for i in 0..m - 1 {
        g[(i, i + 1)] = b[i];
    }
    for (j, &aj) in a.iter().enumerate() {
        g[(m - 1, j)] = -aj;
    }
    routh_table(&char_poly(&g)?)?;
    Ok(g)
}

#[derive(Clone)]
pub struct HighGainDesign {
    pub k: f64,
    pub mu: f64,
    pub a: Vec<f64>,
    pub g: Matrix,
    /// `K = diag(k^{m-1}, ..., 1)`.
    pub scaling: Matrix,
    /// Desired `xi_1` as a function of `eta`.
    pub rho: ScalarMap,
    /// `|λ_max(sym G)|`, the rate constant read in place of `λ_max[G]`.
    pub lambda_g: f64,
    pub backstepping: Backstepping,
}

impl fmt::Debug for HighGainDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HighGainDesign")
            .field("k", &self.k)
            .field("mu", &self.mu)
            .field("a", &self.a)
            .field("g", &self.g)
            .field("lambda_g", &self.lambda_g)
            .finish_non_exhaustive()
    }
}

impl HighGainDesign {
    pub fn new(chain: &StrictFeedbackChain, k: f64, a: Vec<f64>, rho: ScalarMap) -> Result<Self> {
        if !(k >= 1.0) || !k.is_finite() {
            return Err(Error::invalid(format!("gain k = {k} must be >= 1")));
        }
        if a.len() != chain.m {
            return Err(Error::DimensionMismatch {
                expected: chain.m,
                found: a.len(),
            });
        }
        let g = companion_matrix(&a, &chain.b)?;
        let lambda_g = sym_eig(&g.sym_part())?.max().abs();
        Ok(HighGainDesign {
            k,
            mu: 1.0 / k,
            a,
            g,
            scaling: scaling_matrix(k, chain.m),
            rho,
            lambda_g,
            backstepping: backstepping_transform(chain)?,
        })
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    /// `(x, z) -> (eta, xi)`.
    pub fn scaled(&self, x: &[f64], z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        scale_states(self.k, x, &self.backstepping.xi_hat(z))
    }

    /// `(eta, xi) -> (x, z)`.
    pub fn original(&self, eta: &[f64], xi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (x, xh) = unscale_states(self.k, eta, xi);
        let z = self.backstepping.z_from_xi_hat(&xh);
        (x, z)
    }

    /// `u1 = k(-a·xi) + k a_1 rho(eta)`.
    pub fn u1(&self, eta: &[f64], xi: &[f64]) -> f64 {
        let lin: f64 = self.a.iter().zip(xi).map(|(a, v)| -a * v).sum();
        self.k * lin + self.k * self.a[0] * (self.rho)(eta)
    }

    /// Slow manifold `(rho(eta), 0, ..., 0)`.
    pub fn manifold(&self, eta: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.m()];
        v[0] = (self.rho)(eta);
        v
    }

    /// `F(eta, xi) = k^{m-1} f(x, z)`.
    pub fn slow_scaled(&self, chain: &StrictFeedbackChain, eta: &[f64], xi: &[f64]) -> Vec<f64> {
        let (x, z) = self.original(eta, xi);
        let s = self.k.powi(self.m() as i32 - 1);
        (chain.slow_f)(&x, &z).into_iter().map(|v| v * s).collect()
    }

    /// Perturbation in scaled coordinates, `K (I - ∂alpha/∂z) g3(x, z)`.
    /// It is everything in `xi'` that `k A xi + B u1` does not account for.
    pub fn gbar3(&self, chain: &StrictFeedbackChain, eta: &[f64], xi: &[f64]) -> Vec<f64> {
        let (x, z) = self.original(eta, xi);
        let g3 = (chain.g3)(&x, &z);
        let jg = self.backstepping.alpha_jacobian(&z).mul_vec(&g3);
        let d: Vec<f64> = g3.iter().zip(&jg).map(|(a, b)| a - b).collect();
        self.scaling.mul_vec(&d)
    }

    /// Reduced slow field `F(eta, rho(eta), 0, ..., 0)`.
    pub fn reduced(&self, chain: &StrictFeedbackChain, eta: &[f64]) -> Vec<f64> {
        self.slow_scaled(chain, eta, &self.manifold(eta))
    }
}

/// Input realizing the fast closed loop `mu xi' = G xi + a_1 rho e_m + mu gbar3`.
pub fn control_law(design: &HighGainDesign, x: &[f64], z: &[f64]) -> f64 {
    let (eta, xi) = design.scaled(x, z);
    design.backstepping.input(z, design.u1(&eta, &xi))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionCheck {
    pub holds: bool,
    /// `threshold / sup`, infinite when the perturbation Jacobian vanishes.
    pub margin: f64,
    /// Sampled `sup ||∂gbar3/∂xi||`.
    pub sup_jac: f64,
    /// `lambda_g / mu²`.
    pub threshold: f64,
    /// `(eta, xi)` where the sup is attained.
    pub worst_point: Vec<f64>,
}

fn scaled_samples(
    design: &HighGainDesign,
    region: &BoxRegion,
    per_axis: usize,
) -> Result<Vec<Vec<f64>>> {
    if region.dim() <= design.m() {
        return Err(Error::DimensionMismatch {
            expected: design.m() + 1,
            found: region.dim(),
        });
    }
    region.grid(per_axis)
}

/// Samples `||∂gbar3/∂xi||` over `region` (coordinates `(eta, xi)`) and
/// compares against `lambda_g / mu²`.
pub fn theorem4_condition_check(
    chain: &StrictFeedbackChain,
    design: &HighGainDesign,
    region: &BoxRegion,
    per_axis: usize,
) -> Result<ConditionCheck> {
    let pts = scaled_samples(design, region, per_axis)?;
    let n = chain.n;
    let norms = try_map_ordered(Execution::default(), &pts, |p| {
        let (eta, xi) = p.split_at(n);
        Ok::<f64, Error>(jacobian_fd(|v| design.gbar3(chain, eta, v), xi, None)?.norm2())
    })?;
    let (mut worst, mut sup) = (0usize, 0.0f64);
    for (i, &v) in norms.iter().enumerate() {
        if v > sup {
            sup = v;
            worst = i;
        }
    }
    let threshold = design.lambda_g / (design.mu * design.mu);
    Ok(ConditionCheck {
        holds: sup <= threshold,
        margin: if sup > 0.0 {
            threshold / sup
        } else {
            f64::INFINITY
        },
        sup_jac: sup,
        threshold,
        worst_point: pts[worst].clone(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HighGainConstants {
    /// Lipschitz constant of the fast closed loop in `mu`, i.e. `sup ||gbar3||`.
    pub c4: f64,
    /// `sup ||∂rho/∂eta F(eta, xi)||`.
    pub c5: f64,
    pub check: ConditionCheck,
}

pub fn highgain_constants(
    chain: &StrictFeedbackChain,
    design: &HighGainDesign,
    region: &BoxRegion,
    per_axis: usize,
) -> Result<HighGainConstants> {
    let check = theorem4_condition_check(chain, design, region, per_axis)?;
    let pts = scaled_samples(design, region, per_axis)?;
    let n = chain.n;
    let vals = try_map_ordered(Execution::default(), &pts, |p| {
        let (eta, xi) = p.split_at(n);
        let c4 = norm2(&design.gbar3(chain, eta, xi));
        let grad = jacobian_fd(|e| vec![(design.rho)(e)], eta, None)?;
        let c5 = grad.mul_vec(&design.slow_scaled(chain, eta, xi))[0].abs();
        Ok::<(f64, f64), Error>((c4, c5))
    })?;
    let (c4, c5) = vals
        .iter()
        .fold((0.0f64, 0.0f64), |(a, b), &(c, d)| (a.max(c), b.max(d)));
    Ok(HighGainConstants { c4, c5, check })
}

/// `(c4 + c5) / (lambda_g/mu² - gbar_jac_sup)`, the limit of
/// `||xi - (rho(eta), 0, ..., 0)||`.
pub fn theorem4_bound(c4: f64, c5: f64, gbar_jac_sup: f64, design: &HighGainDesign) -> Result<f64> {
    let den = design.lambda_g / (design.mu * design.mu) - gbar_jac_sup;
    if !(den > EPS_RATE) {
        return Err(Error::BoundInapplicable(format!(
            "lambda_g/mu^2 - sup||dgbar3/dxi|| = {den:.6e} is not positive"
        )));
    }
    Ok((c4 + c5) / den)
}

#[derive(Clone, Debug)]
pub struct HighGainRun {
    /// States `[x, z]`; inputs are the applied (possibly clamped) `u`.
    pub trajectory: Trajectory,
    /// `[eta, xi]` at each sample.
    pub scaled: Vec<Vec<f64>>,
    /// `||xi - (rho(eta), 0, ..., 0)||`.
    pub manifold_error: Vec<f64>,
    /// Largest manifold error over the final window.
    pub steady_error: f64,
    /// Largest `||x||` over the final window.
    pub steady_slow: f64,
    pub window_start: f64,
    pub max_abs_input: f64,
}

/// Closed loop in original coordinates. `dt` must respect `mu/50`.
pub fn simulate_highgain(
    chain: &StrictFeedbackChain,
    design: &HighGainDesign,
    x0: &[f64],
    z0: &[f64],
    t1: f64,
    dt: f64,
    saturation: Option<f64>,
) -> Result<HighGainRun> {
    crate::composite::check_step(dt, design.mu)?;
    if let Some(s) = saturation {
        if !(s > 0.0) {
            return Err(Error::invalid(format!("saturation {s} must be positive")));
        }
    }
    let (n, m) = (chain.n, chain.m);
    if x0.len() != n || z0.len() != m {
        return Err(Error::DimensionMismatch {
            expected: n + m,
            found: x0.len() + z0.len(),
        });
    }
    let input = |_t: f64, s: &[f64]| {
        let (x, z) = s.split_at(n);
        let u = control_law(design, x, z);
        match saturation {
            Some(lim) => u.clamp(-lim, lim),
            None => u,
        }
    };
    let field = |t: f64, s: &[f64]| {
        let (x, z) = s.split_at(n);
        let u = input(t, s);
        let mut d = (chain.slow_f)(x, z);
        d.extend(chain.zdot(x, z, u));
        d
    };
    let mut s0 = x0.to_vec();
    s0.extend_from_slice(z0);
    let trajectory = rk4_integrate_recording(field, input, &s0, 0.0, t1, dt)?;
    let mut scaled = Vec::with_capacity(trajectory.len());
    let mut manifold_error = Vec::with_capacity(trajectory.len());
    for s in &trajectory.states {
        let (x, z) = s.split_at(n);
        let (mut eta, xi) = design.scaled(x, z);
        manifold_error.push(norm2_diff(&xi, &design.manifold(&eta)));
        eta.extend(xi);
        scaled.push(eta);
    }
    let window_start = t1 - crate::nonstandard::STEADY_WINDOW * t1;
    let (mut steady_error, mut steady_slow) = (0.0f64, 0.0f64);
    for i in trajectory.window_from(window_start) {
        steady_error = steady_error.max(manifold_error[i]);
        steady_slow = steady_slow.max(norm2(&trajectory.states[i][..n]));
    }
    let max_abs_input = trajectory.inputs.iter().fold(0.0f64, |a, u| a.max(u.abs()));
    Ok(HighGainRun {
        trajectory,
        scaled,
        manifold_error,
        steady_error,
        steady_slow,
        window_start,
        max_abs_input,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contraction::{check_region, Metric};

    fn chain(g11: Expr) -> StrictFeedbackChain {
        StrictFeedbackChain::new(
            1,
            vec![g11, Expr::Const(0.0)],
            vec![1.0, 1.0],
            Arc::new(|x, z| vec![x[0] * z[1].sin(), 0.0]),
            Arc::new(|x, z| vec![x[0] * x[0] + z[0] + x[0] * z[1]]),
        )
        .unwrap()
    }

    fn example(k: f64) -> (StrictFeedbackChain, HighGainDesign) {
        let c = chain(Expr::Const(0.0));
        let d = HighGainDesign::new(
            &c,
            k,
            vec![2.0, 2.0],
            Arc::new(move |e| -e[0] * e[0] / k - e[0]),
        )
        .unwrap();
        (c, d)
    }

    #[test]
    fn alpha_recursion() {
        let (_, d) = example(10.0);
        assert_eq!(
            d.backstepping.alpha,
            vec![Expr::Const(0.0), Expr::Const(0.0)]
        );
        let v = chain(Expr::var("z1"));
        let bs = backstepping_transform(&v).unwrap();
        assert_eq!(bs.alpha[1].to_string(), "-z1");
        assert_eq!(bs.xi_hat(&[0.3, 0.5]), vec![0.3, 0.8]);
        assert_eq!(bs.z_from_xi_hat(&[0.3, 0.8]), vec![0.3, 0.5]);
        for z in [[0.3, -0.2], [1.0, 2.0]] {
            assert!(bs.residual(&v, &z, 0.7) < 1e-12);
        }
    }

    #[test]
    fn degenerate_chains() {
        let one = StrictFeedbackChain::new(
            1,
            vec![crate::sysdsl::parse_expr("z1^2").unwrap()],
            vec![2.0],
            Arc::new(|_, _| vec![0.0]),
            Arc::new(|x, _| vec![-x[0]]),
        )
        .unwrap();
        let bs = backstepping_transform(&one).unwrap();
        assert_eq!(bs.a, Matrix::zeros(1, 1));
        assert_eq!(bs.xi_hat(&[0.4]), vec![0.4]);
        assert!((bs.input(&[0.5], 1.0) - (1.0 - 0.25) / 2.0).abs() < 1e-15);

        let lin = StrictFeedbackChain::new(
            1,
            vec![Expr::Const(0.0); 3],
            vec![1.0; 3],
            Arc::new(|_, _| vec![0.0; 3]),
            Arc::new(|x, _| vec![-x[0]]),
        )
        .unwrap();
        let bs = backstepping_transform(&lin).unwrap();
        assert!(bs.alpha.iter().all(|a| *a == Expr::Const(0.0)));
        assert_eq!(bs.xi_hat(&[0.1, 0.2, 0.3]), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn three_step_residual() {
        let src = ["z1^2", "sin(z1)*z2", "z1*z2*z3"];
        let c = StrictFeedbackChain::new(
            1,
            src.iter()
                .map(|s| crate::sysdsl::parse_expr(s).unwrap())
                .collect(),
            vec![1.0, 2.0, 0.5],
            Arc::new(|_, _| vec![0.0; 3]),
            Arc::new(|x, _| vec![-x[0]]),
        )
        .unwrap();
        let bs = backstepping_transform(&c).unwrap();
        for z in BoxRegion::cube(3, -1.0, 1.0).unwrap().grid(5).unwrap() {
            assert!(bs.residual(&c, &z, -0.3) <= 1e-8);
            let back = bs.z_from_xi_hat(&bs.xi_hat(&z));
            assert!(norm2_diff(&back, &z) < 1e-12);
        }
    }

    #[test]
    fn chain_validation() {
        let bad = StrictFeedbackChain::new(
            1,
            vec![Expr::var("z2"), Expr::Const(0.0)],
            vec![1.0, 1.0],
            Arc::new(|_, _| vec![0.0; 2]),
            Arc::new(|_, _| vec![0.0]),
        );
        assert!(matches!(bad, Err(Error::InvalidInput(msg)) if msg.contains("z2")));
        let bad = StrictFeedbackChain::new(
            1,
            vec![Expr::Const(0.0)],
            vec![-1.0],
            Arc::new(|_, _| vec![0.0]),
            Arc::new(|_, _| vec![0.0]),
        );
        assert!(bad.is_err());
        let (c, _) = example(10.0);
        let (c1, c2) = c.growth_constants(0.5, 5).unwrap();
        assert!((c1 - 1.0).abs() < 1e-12);
        assert_eq!(c2, 0.0);
    }

    #[test]
    fn scaling() {
        assert_eq!(scaling_matrix(10.0, 2), Matrix::diag(&[10.0, 1.0]));
        let (eta, xi) = scale_states(10.0, &[0.3], &[0.5, 0.7]);
        assert_eq!(eta, vec![3.0]);
        assert_eq!(xi, vec![5.0, 0.7]);
        let (x, xh) = scale_states(1.0, &[0.3], &[0.5, 0.7]);
        assert_eq!((x, xh), (vec![0.3], vec![0.5, 0.7]));
        let (x, xh) = unscale_states(
            7.0,
            &scale_states(7.0, &[0.3], &[0.5, -0.7, 1.1]).0,
            &[0.0; 3],
        );
        assert!((x[0] - 0.3).abs() < 1e-15 && xh == vec![0.0; 3]);
    }

    #[test]
    fn companion() {
        let g = companion_matrix(&[2.0, 2.0], &[1.0]).unwrap();
        assert_eq!(g, Matrix::from_rows(&[&[0.0, 1.0], &[-2.0, -2.0]]));
        match companion_matrix(&[-1.0], &[]) {
            Err(Error::NotHurwitz(msg)) => assert!(msg.contains("row 1"), "{msg}"),
            other => panic!("{other:?}"),
        }
        match companion_matrix(&[1.0, 0.0], &[1.0]) {
            Err(Error::NotHurwitz(msg)) => assert!(msg.contains("Routh row"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scaled_dynamics_and_control() {
        let (c, d) = example(10.0);
        // Oracle: ξ' = kAξ + B u1 + ḡ3 with ḡ3 = (η sin ξ2, 0).
        for (x, z) in [([0.5], [0.2, -0.3]), ([-1.0], [1.0, 0.0])] {
            let (eta, xi) = d.scaled(&x, &z);
            let g = d.gbar3(&c, &eta, &xi);
            assert!((g[0] - eta[0] * xi[1].sin()).abs() < 1e-14 && g[1] == 0.0);
            let f = d.slow_scaled(&c, &eta, &xi)[0];
            assert!((f - (eta[0] * eta[0] / 10.0 + xi[0] + eta[0] * xi[1])).abs() < 1e-12);
        }
        // u = -2kξ2 - 2kξ1 + 2kρ(η)
        assert!((control_law(&d, &[-1.0], &[1.0, 0.0]) + 200.0).abs() < 1e-12);
        assert!((control_law(&d, &[0.5], &[0.0, 0.0]) + 150.0).abs() < 1e-12);
        let red = check_region(
            |e| d.reduced(&c, e),
            &BoxRegion::cube(1, -10.0, 10.0).unwrap(),
            &Metric::identity(1),
            21,
        )
        .unwrap();
        assert!((red.rate - 1.0).abs() < 1e-6);
    }

    #[test]
    fn variant_chain_scaled_residual() {
        let c = chain(Expr::var("z1"));
        let k = 4.5;
        let d = HighGainDesign::new(&c, k, vec![2.0, 2.0], Arc::new(move |e| -e[0])).unwrap();
        let x = [0.3];
        let z = [0.4, -0.6];
        let u = control_law(&d, &x, &z);
        let zd = c.zdot(&x, &z, u);
        let j = d.backstepping.alpha_jacobian(&z);
        let jzd = j.mul_vec(&zd);
        let xh_dot: Vec<f64> = zd.iter().zip(&jzd).map(|(a, b)| a - b).collect();
        let xi_dot = d.scaling.mul_vec(&xh_dot);
        let (eta, xi) = d.scaled(&x, &z);
        let mut want = d.backstepping.a.scale(k).mul_vec(&xi);
        want[1] += d.u1(&eta, &xi);
        let g = d.gbar3(&c, &eta, &xi);
        for i in 0..2 {
            assert!((xi_dot[i] - want[i] - g[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn condition_check() {
        let (c, d) = example(10.0);
        assert!((d.lambda_g - (1.25f64.sqrt() - 1.0)).abs() < 1e-12);
        let region =
            BoxRegion::from_intervals(&[(-10.0, 10.0), (-10.0, 10.0), (-1.0, 1.0)]).unwrap();
        let chk = theorem4_condition_check(&c, &d, &region, 11).unwrap();
        assert!((chk.sup_jac - 10.0).abs() < 1e-6, "{}", chk.sup_jac);
        assert!(chk.holds && chk.margin > 1.0);
        let (c1, d1) = example(1.0);
        let chk = theorem4_condition_check(&c1, &d1, &region, 11).unwrap();
        assert!(!chk.holds);
        assert_eq!(chk.worst_point[0].abs(), 10.0);

        let zero = StrictFeedbackChain::new(
            1,
            vec![Expr::Const(0.0); 2],
            vec![1.0; 2],
            Arc::new(|_, _| vec![0.0; 2]),
            Arc::new(|x, z| vec![x[0] * x[0] + z[0]]),
        )
        .unwrap();
        let dz = HighGainDesign::new(&zero, 2.0, vec![2.0, 2.0], Arc::new(|e| -e[0])).unwrap();
        let chk = theorem4_condition_check(&zero, &dz, &region, 5).unwrap();
        assert!(chk.holds && chk.margin.is_infinite());
    }

    #[test]
    fn bound_formula() {
        let (_, d10) = example(10.0);
        let (_, d20) = example(20.0);
        assert_eq!(theorem4_bound(0.0, 0.0, 1.0, &d10).unwrap(), 0.0);
        let r = theorem4_bound(1.0, 1.0, 0.1, &d10).unwrap()
            / theorem4_bound(1.0, 1.0, 0.1, &d20).unwrap();
        assert!((r - 4.0).abs() < 0.05, "{r}");
        assert!(matches!(
            theorem4_bound(1.0, 1.0, 1e3, &d10),
            Err(Error::BoundInapplicable(_))
        ));
    }

    #[test]
    fn gain_ordering_on_small_region() {
        let region_for = |k: f64| {
            let (eta, xi) = scale_states(k, &[0.2], &[0.2, 0.2]);
            BoxRegion::from_intervals(&[(-eta[0], eta[0]), (-xi[0], xi[0]), (-xi[1], xi[1])])
                .unwrap()
        };
        let mut bounds = Vec::new();
        for k in [4.5, 10.0] {
            let (c, d) = example(k);
            let cs = highgain_constants(&c, &d, &region_for(k), 11).unwrap();
            bounds.push(theorem4_bound(cs.c4, cs.c5, cs.check.sup_jac, &d).unwrap());
        }
        assert!(bounds[1] < bounds[0], "{bounds:?}");
    }

    #[test]
    fn simulation_and_saturation() {
        let (c, d) = example(10.0);
        let run = simulate_highgain(&c, &d, &[-1.0], &[1.0, 0.0], 10.0, d.mu / 50.0, None).unwrap();
        let last = run.trajectory.last_state().unwrap();
        assert!(norm2(last) < 1e-2, "{last:?}");
        assert!(run.max_abs_input >= 200.0 - 1e-9);
        let sat =
            simulate_highgain(&c, &d, &[-1.0], &[1.0, 0.0], 10.0, d.mu / 50.0, Some(5.0)).unwrap();
        assert!(sat.max_abs_input <= 5.0);
        assert!(norm2(sat.trajectory.last_state().unwrap()) < 1e-1);
        assert!(matches!(
            simulate_highgain(&c, &d, &[-1.0], &[1.0, 0.0], 1.0, 0.01, None),
            Err(Error::StepTooLarge { .. })
        ));
    }
}
