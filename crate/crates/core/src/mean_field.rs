//! The mean-field occupation ODE `f' = -f + a f (1 - f)`, `f(0) = 1`, with
//! `a = lambda d p`.
//!
//! Writing `c = a - 1`, the equation is Bernoulli: `f' = c f - a f^2`, so
//! `g = 1/f` solves `g' = a - c g`, `g(0) = 1`. Since `a - c = 1` this gives
//! `f(t) = 1 / (1 + (1 - e^{-ct}) / c)`, continuous at `c = 0` where it
//! becomes `1 / (1 + t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    pub a: f64,
    pub t: f64,
    pub f: f64,
}

fn check(a: f64, t: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("a = {a} must be positive")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t = {t} must be nonnegative")));
    }
    Ok(())
}

pub fn rhs(a: f64, f: f64) -> f64 {
    (a - 1.0) * f - a * f * f
}

/// Long-time limit: `0` for `a <= 1`, `(a - 1) / a` above.
pub fn fixed_point(a: f64) -> f64 {
    if a > 1.0 {
        (a - 1.0) / a
    } else {
        0.0
    }
}

pub fn solve_closed_form(a: f64, t: f64) -> Result<f64> {
    check(a, t)?;
    let c = a - 1.0;
    // (1 - e^{-ct}) / c, written to stay accurate as c -> 0.
    let growth = if c == 0.0 { t } else { -(-c * t).exp_m1() / c };
    Ok(1.0 / (1.0 + growth))
}

/// Classical fourth-order Runge-Kutta from `f(0) = 1` up to `t`, with the
/// last step shortened to land on `t` exactly.
pub fn integrate_numeric(a: f64, t: f64, step: f64) -> Result<f64> {
    check(a, t)?;
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("step = {step} must be positive")));
    }
    let mut f = 1.0;
    let mut now = 0.0;
    while now < t {
        let h = step.min(t - now);
        f = rk4_step(a, f, h);
        now = if t - now <= step { t } else { now + h };
    }
    Ok(f)
}

fn rk4_step(a: f64, f: f64, h: f64) -> f64 {
    let k1 = rhs(a, f);
    let k2 = rhs(a, f + 0.5 * h * k1);
    let k3 = rhs(a, f + 0.5 * h * k2);
    let k4 = rhs(a, f + h * k3);
    f + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// `(t, f)` at `t = 0, dt, 2 dt, ...` up to `t_max`, from the closed form.
pub fn trajectory(a: f64, t_max: f64, dt: f64) -> Result<Vec<MeanFieldState>> {
    check(a, t_max)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
    }
    let steps = (t_max / dt).round() as usize;
    (0..=steps)
        .map(|k| {
            let t = (k as f64 * dt).min(t_max);
            Ok(MeanFieldState {
                a,
                t,
                f: solve_closed_form(a, t)?,
            })
        })
        .collect()
}
