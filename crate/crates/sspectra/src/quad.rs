//! Adaptive Simpson quadrature with an absolute-error budget.

use crate::error::{Error, Result};

const MAX_DEPTH: usize = 48;

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || (b - a) < 1e-15 {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::numerical(format!(
            "adaptive quadrature did not converge on [{a}, {b}] (residual {:.3e})",
            delta.abs()
        )));
    }
    // floor the child budget at machine-noise level so the recursion does
    // not chase rounding error on subintervals
    let child_tol = (0.5 * tol).max(1e-17);
    let l = recurse(f, a, m, fa, flm, fm, left, child_tol, depth + 1)?;
    let r = recurse(f, m, b, fm, frm, fb, right, child_tol, depth + 1)?;
    Ok(l + r)
}

/// Integrate f over [a, b] to absolute accuracy ~tol.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(b > a) {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 0)
}
