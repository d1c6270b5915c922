//! The special function: region classifier, `u` on the strip
//! `S = [0, inf) x [-1, 1]`, and its homogeneous extension
//!
//! ```text
//! U(x, y, z) = (|y| v z)^p u(x / (|y| v z), y / (|y| v z)).
//! ```
//!
//! With `K = ((alpha+1)p)^p`, `w = (px + p|y| - 1)/(p-1)` and `r = h(x + |y|)`:
//!
//! ```text
//! D0: |y| <= γ(x)                     u = 1 - K x^p
//! D1: |y| >  γ(x),  x + |y| <= 1      u = 1 - w^(p-1) [p(p(alpha+1)-1)x - p|y| + 1]
//! D2: |y| >  γ(x),  x + |y| >  1      u = 1 - K r^(p-1) (px - (p-1)r)
//! ```
//!
//! Gradients are the hand-derived partials of these formulas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::GammaSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    D0,
    D1,
    D2,
}

/// A point of the domain `[0, inf) x R x (0, inf)` of `U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::Domain(format!("x = {x} must be finite and >= 0")));
        }
        if !y.is_finite() {
            return Err(Error::Domain(format!("y = {y} must be finite")));
        }
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::Domain(format!("z = {z} must be finite and > 0")));
        }
        Ok(Self { x, y, z })
    }

    /// `|y| v z`.
    pub fn scale(&self) -> f64 {
        self.y.abs().max(self.z)
    }

    /// `(x, y) / (|y| v z)`, a point of the strip.
    pub fn normalized(&self) -> (f64, f64) {
        let m = self.scale();
        (self.x / m, self.y / m)
    }
}

fn check_strip(x: f64, y: f64) -> Result<()> {
    if !(x >= 0.0) || !(y.abs() <= 1.0) {
        return Err(Error::OutsideStrip { x, y });
    }
    Ok(())
}

/// Region of `(x, y)` in the strip. Points with `|y| = γ(x)` belong to D0,
/// points with `x + |y| = 1` (and `|y| > γ(x)`) to D1.
///
/// Beyond the solution's `x_max` the classification is still decided when
/// `|y| <= γ(x_max)`, since γ is non-decreasing; otherwise it is an
/// extrapolation error.
pub fn classify(x: f64, y: f64, sol: &GammaSolution) -> Result<Region> {
    check_strip(x, y)?;
    let ay = y.abs();
    let g = if x > sol.x_max() {
        let g_max = sol.gamma(sol.x_max())?;
        if ay <= g_max {
            return Ok(Region::D0);
        }
        return Err(Error::Extrapolation {
            x,
            x_max: sol.x_max(),
        });
    } else {
        sol.gamma(x)?
    };
    if ay <= g {
        Ok(Region::D0)
    } else if x + ay <= 1.0 {
        Ok(Region::D1)
    } else {
        Ok(Region::D2)
    }
}

/// `u(x, y)` on the strip.
pub fn u_eval(x: f64, y: f64, sol: &GammaSolution) -> Result<f64> {
    let region = classify(x, y, sol)?;
    u_in_region(region, x, y, sol)
}

/// `(u, u_x, u_y)` on the strip. At `x = 0`, `u_x` is the right derivative.
pub fn u_with_partials(x: f64, y: f64, sol: &GammaSolution) -> Result<(f64, f64, f64)> {
    let region = classify(x, y, sol)?;
    partials_in_region(region, x, y, sol)
}

fn kappa_pow(sol: &GammaSolution, x: f64, e: f64) -> f64 {
    if x == 0.0 {
        if e == 0.0 {
            sol.params().kappa()
        } else {
            0.0
        }
    } else {
        (sol.params().log_kappa() + e * x.ln()).exp()
    }
}

/// Evaluate the formula of `region` at `(x, y)` regardless of where the
/// point actually lies. The D1 formula needs `px + p|y| >= 1`, the D2
/// formula `x + |y| >= 1`.
pub fn u_in_region(region: Region, x: f64, y: f64, sol: &GammaSolution) -> Result<f64> {
    let p = sol.params().p();
    let ay = y.abs();
    match region {
        Region::D0 => Ok(1.0 - kappa_pow(sol, x, p)),
        Region::D1 => {
            let (w, l) = d1_parts(x, ay, sol)?;
            Ok(1.0 - w.powf(p - 1.0) * l)
        }
        Region::D2 => {
            let r = sol.h(x + ay)?;
            Ok(1.0 - kappa_pow(sol, r, p - 1.0) * (p * x - (p - 1.0) * r))
        }
    }
}

fn d1_parts(x: f64, ay: f64, sol: &GammaSolution) -> Result<(f64, f64)> {
    let p = sol.params().p();
    let a = sol.params().alpha();
    let base = p * x + p * ay - 1.0;
    if base < 0.0 {
        return Err(Error::Domain(format!(
            "D1 formula needs px + p|y| >= 1 at ({x}, {ay})"
        )));
    }
    let w = base / (p - 1.0);
    let l = p * (p * (a + 1.0) - 1.0) * x - p * ay + 1.0;
    Ok((w, l))
}

/// `(u, u_x, u_y)` from the formula of `region`; see [`u_in_region`].
pub fn partials_in_region(
    region: Region,
    x: f64,
    y: f64,
    sol: &GammaSolution,
) -> Result<(f64, f64, f64)> {
    let p = sol.params().p();
    let a = sol.params().alpha();
    let sign = if y < 0.0 { -1.0 } else { 1.0 };
    let ay = y.abs();
    let (u, ux, uy) = match region {
        Region::D0 => (
            1.0 - kappa_pow(sol, x, p),
            -p * kappa_pow(sol, x, p - 1.0),
            0.0,
        ),
        Region::D1 => {
            let (w, l) = d1_parts(x, ay, sol)?;
            let wp2 = w.powf(p - 2.0);
            let u = 1.0 - wp2 * w * l;
            let ux = -p * wp2 * (l + w * (p * (a + 1.0) - 1.0));
            let uy = -p * wp2 * (l - w);
            (u, ux, uy)
        }
        Region::D2 => {
            let (r, dr) = sol.h_with_prime(x + ay)?;
            let kr2 = kappa_pow(sol, r, p - 2.0);
            let u = 1.0 - kr2 * r * (p * x - (p - 1.0) * r);
            let ux = -p * kr2 * (r + (p - 1.0) * dr * (x - r));
            let uy = p * (p - 1.0) * kr2 * dr * (r - x);
            (u, ux, uy)
        }
    };
    Ok((u, ux, sign * uy))
}

/// `U(x, y, z)`.
pub fn big_u_eval(pt: &Point3, sol: &GammaSolution) -> Result<f64> {
    let m = pt.scale();
    let (x, y) = pt.normalized();
    let u = u_eval(x, y.clamp(-1.0, 1.0), sol)?;
    Ok(m.powf(sol.params().p()) * u)
}

/// `(U, U_x, U_y)`. On `|y| = z` the `z`-branch is used, on `y = 0` the
/// `y >= 0` side; at `x = 0`, `U_x` is the right derivative.
pub fn big_u_grad(pt: &Point3, sol: &GammaSolution) -> Result<(f64, f64, f64)> {
    let p = sol.params().p();
    let m = pt.scale();
    let (x, y) = pt.normalized();
    let y = y.clamp(-1.0, 1.0);
    let (u, ux, uy) = u_with_partials(x, y, sol)?;
    let mp1 = m.powf(p - 1.0);
    if pt.y.abs() <= pt.z {
        Ok((m * mp1 * u, mp1 * ux, mp1 * uy))
    } else {
        // m = |y|: differentiate |y|^p u(x/|y|, ±1)
        let sign = pt.y.signum();
        Ok((m * mp1 * u, mp1 * ux, sign * mp1 * (p * u - x * ux)))
    }
}

/// `U - ((|y| v z)^p - K x^p)` for a point of the strip (that is, with
/// `|y| v z = 1`), computed in a form without cancellation. It is identically
/// zero on D0; on D2 it equals `K r^p φ(x/r)` with `φ(t) = t^p - 1 - p(t-1)`,
/// which makes its sign independent of rounding in `r`.
pub fn majorization_slack(x: f64, y: f64, sol: &GammaSolution) -> Result<f64> {
    let p = sol.params().p();
    match classify(x, y, sol)? {
        Region::D0 => Ok(0.0),
        Region::D1 => {
            let (w, l) = d1_parts(x, y.abs(), sol)?;
            Ok(kappa_pow(sol, x, p) - w.powf(p - 1.0) * l)
        }
        Region::D2 => {
            let r = sol.h(x + y.abs())?;
            let d = (x - r) / r;
            let phi = (p * d.ln_1p()).exp_m1() - p * d;
            Ok(kappa_pow(sol, r, p) * phi)
        }
    }
}
