//! Fixed-step classical Runge-Kutta integration.

use crate::error::{Error, Result};
use crate::model::Trajectory;

/// One classical RK4 step of size `h` from `(t, x)`.
pub fn rk4_step<F>(field: &F, t: f64, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64]) -> Vec<f64> + ?Sized,
{
    let n = x.len();
    let k1 = field(t, x);
    let mut tmp = vec![0.0; n];
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    let k2 = field(t + 0.5 * h, &tmp);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    let k3 = field(t + 0.5 * h, &tmp);
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    let k4 = field(t + h, &tmp);
    (0..n)
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Integrates `x' = field(t, x)` from `t0` to `t1` with fixed step `dt`.
/// The last step is shortened so the trajectory ends exactly at `t1`.
/// The recorded input column is zero.
pub fn rk4_integrate<F>(field: F, x0: &[f64], t0: f64, t1: f64, dt: f64) -> Result<Trajectory>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    rk4_integrate_recording(field, |_, _| 0.0, x0, t0, t1, dt)
}

/// As [`rk4_integrate`], recording `input(t, x)` at every output sample.
pub fn rk4_integrate_recording<F, U>(
    field: F,
    input: U,
    x0: &[f64],
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Trajectory>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
    U: Fn(f64, &[f64]) -> f64,
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    if !(t1 > t0) {
        return Err(Error::invalid(format!("t1 = {t1} must exceed t0 = {t0}")));
    }
    if let Some(axis) = x0.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "initial state".into(),
            axis,
        });
    }
    let steps = ((t1 - t0) / dt - 1e-9).ceil().max(1.0) as usize;
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        inputs: Vec::with_capacity(steps + 1),
        step: dt,
    };
    let mut x = x0.to_vec();
    let mut t = t0;
    traj.times.push(t);
    traj.inputs.push(input(t, &x));
    traj.states.push(x.clone());
    for i in 1..=steps {
        let t_next = if i == steps { t1 } else { t0 + i as f64 * dt };
        let next = rk4_step(&field, t, &x, t_next - t);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged {
                t_last: t,
                partial: Box::new(traj),
            });
        }
        x = next;
        t = t_next;
        let u = input(t, &x);
        traj.times.push(t);
        traj.inputs.push(u);
        traj.states.push(x.clone());
    }
    Ok(traj)
}
