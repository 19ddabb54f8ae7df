//! Bracketed scalar root finding: bisection safeguarding secant steps.

use crate::error::{Error, Result};

/// Finds a root of `f` in `[lo, hi]`, which must bracket a sign change.
///
/// Each iteration tries the secant point of the current bracket and falls back
/// to bisection whenever the secant step leaves the bracket or the bracket
/// failed to halve on the previous step.
pub fn bracketed<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::NonConvergence(format!(
            "no sign change on [{a}, {b}] (f = {fa:.3e}, {fb:.3e})"
        )));
    }
    let mut last_width = b - a;
    for _ in 0..300 {
        let width = b - a;
        if width <= xtol {
            break;
        }
        let secant = b - fb * (b - a) / (fb - fa);
        let use_secant = secant > a && secant < b && width <= 0.5 * last_width;
        let x = if use_secant { secant } else { 0.5 * (a + b) };
        last_width = width;
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        if b - a > 0.9 * width {
            // secant stalled at one end; force a bisection next time
            last_width = 0.0;
        }
    }
    if b - a > xtol.max(4.0 * f64::EPSILON * a.abs().max(b.abs())) {
        return Err(Error::NonConvergence(format!("bracket [{a}, {b}] did not shrink")));
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}
