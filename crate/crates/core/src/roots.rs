//! Bracketed root finding for monotone scalar maps.
//!
//! The solver keeps a sign-changing bracket at all times and mixes secant
//! (regula falsi with the Illinois modification) steps with bisection, so it
//! inherits the guaranteed convergence of bisection while usually converging
//! superlinearly.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Stop once `|f(x)| <= f_tol`.
    pub f_tol: f64,
    /// Stop once the bracket is narrower than this.
    pub x_tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            f_tol: 1e-12,
            x_tol: 0.0,
            max_iter: 200,
        }
    }
}

/// Find a root of `f` in `[lo, hi]`; `f(lo)` and `f(hi)` must not share a
/// strict sign.
pub fn find_root<F>(f: F, mut lo: f64, mut hi: f64, opts: RootOptions) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(lo <= hi) {
        return Err(Error::RootFinding(format!("empty bracket [{lo}, {hi}]")));
    }
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(Error::RootFinding("non-finite value at bracket end".into()));
    }
    if f_lo.abs() <= opts.f_tol {
        return Ok(lo);
    }
    if f_hi.abs() <= opts.f_tol {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::RootFinding(format!(
            "no sign change on [{lo}, {hi}]: f = ({f_lo:e}, {f_hi:e})"
        )));
    }

    // which end was retained on the previous step (for Illinois damping)
    let mut side = 0i8;
    for _ in 0..opts.max_iter {
        let width = hi - lo;
        if width <= opts.x_tol.max(4.0 * f64::EPSILON * lo.abs().max(hi.abs())) {
            return Ok(if f_lo.abs() < f_hi.abs() { lo } else { hi });
        }
        let mut x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        // fall back to bisection if the secant point hugs an end
        let guard = 0.01 * width;
        if !x.is_finite() || x <= lo + guard || x >= hi - guard {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::RootFinding(format!("non-finite value at x = {x}")));
        }
        if fx.abs() <= opts.f_tol {
            return Ok(x);
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::RootFinding(format!(
        "no convergence after {} iterations on [{lo}, {hi}]",
        opts.max_iter
    )))
}

/// Plain bisection down to a bracket width of `width`. Slow, but with no
/// moving parts; used as an oracle for [`find_root`].
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, width: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let neg_at_lo = f(lo) < 0.0;
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) < 0.0) == neg_at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
