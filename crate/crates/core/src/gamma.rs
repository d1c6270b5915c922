//! The boundary curve γ and its inverse machinery.
//!
//! For `p >= 2` and `alpha in (0, 1]` let `C = ((alpha+1)p)^p (p-1)` and
//! `x0 = 1/((alpha+1)p)`. On `[x0, inf)` the curve solves
//!
//! ```text
//! γ'(x) = (-1 + C (1-γ) γ x^(p-2)) / (1 + C (1-γ) x^(p-1)),   γ(x0) = 1 - x0,
//! ```
//!
//! and on `[0, x0)` it is the line `[(p-1)(alpha+1) - 1] x + 1/p`, which joins
//! the ODE solution with matching slope.
//!
//! Numerically the solution is carried as the log-deficit `λ = ln(1 - γ)`.
//! The deficit decays like `x^(2-p) / C`, so working with `γ` directly would
//! lose all relative precision in `1 - γ` (which every formula downstream
//! multiplies by `C x^(p-1)`). The ODE is also stiff for larger `p`: its
//! relaxation rate onto the slow manifold grows like `C x^(p-2) / (1 + x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, ScalarOde, StepOptions};
use crate::roots::{find_root, RootOptions};

/// Exponent `p` and subordination strength `alpha`, plus derived constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct Params {
    p: f64,
    alpha: f64,
    c: f64,
    x0: f64,
    log_c: f64,
    log_kappa: f64,
}

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    p: f64,
    alpha: f64,
    #[serde(default)]
    c: Option<f64>,
    #[serde(default)]
    x0: Option<f64>,
}

impl TryFrom<ParamsRepr> for Params {
    type Error = Error;
    fn try_from(r: ParamsRepr) -> Result<Self> {
        Params::new(r.p, r.alpha)
    }
}

impl From<Params> for ParamsRepr {
    fn from(p: Params) -> Self {
        ParamsRepr {
            p: p.p,
            alpha: p.alpha,
            c: Some(p.c),
            x0: Some(p.x0),
        }
    }
}

impl Params {
    pub fn new(p: f64, alpha: f64) -> Result<Self> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(Error::Domain(format!(
                "p = {p} must be a finite number >= 2"
            )));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain(format!("alpha = {alpha} must lie in (0, 1]")));
        }
        let base = (alpha + 1.0) * p;
        let log_kappa = p * base.ln();
        let log_c = log_kappa + (p - 1.0).ln();
        Ok(Self {
            p,
            alpha,
            c: log_c.exp(),
            x0: 1.0 / base,
            log_c,
            log_kappa,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `C = ((alpha+1)p)^p (p-1)`; infinite if it overflows, see [`Params::log_c`].
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn log_c(&self) -> f64 {
        self.log_c
    }

    /// Junction point `1/((alpha+1)p)`.
    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// `((alpha+1)p)^p`, the constant of the majorant.
    pub fn kappa(&self) -> f64 {
        self.log_kappa.exp()
    }

    pub fn log_kappa(&self) -> f64 {
        self.log_kappa
    }

    /// The constant `(alpha+1)p` of the maximal inequality.
    pub fn bound(&self) -> f64 {
        (self.alpha + 1.0) * self.p
    }

    /// Slope of the linear piece, `(p-1)(alpha+1) - 1`.
    pub fn linear_slope(&self) -> f64 {
        (self.p - 1.0) * (self.alpha + 1.0) - 1.0
    }

    /// `kappa * x^p`, evaluated in log space.
    pub fn kappa_pow(&self, x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            (self.log_kappa + self.p * x.ln()).exp()
        }
    }
}

/// The linear extension of γ on `[0, x0]`.
pub fn gamma_linear(x: f64, params: &Params) -> f64 {
    debug_assert!(
        (0.0..=params.x0() * (1.0 + 1e-12)).contains(&x),
        "x = {x} outside [0, x0]"
    );
    params.linear_slope() * x + 1.0 / params.p()
}

/// The γ-ODE written for the log-deficit `λ = ln(1 - γ)`.
struct LogDeficitOde {
    params: Params,
}

impl LogDeficitOde {
    /// `A = C (1-γ) x^(p-2)` from the log-deficit.
    fn a(&self, x: f64, lam: f64) -> f64 {
        (self.params.log_c + lam + (self.params.p - 2.0) * x.ln()).exp()
    }

    /// γ' in a form free of cancellation: `expm1(ln A + ln(1-ε)) / (1 + A x)`.
    fn gamma_prime(&self, x: f64, lam: f64) -> f64 {
        let eps = lam.exp();
        let ln_a = self.params.log_c + lam + (self.params.p - 2.0) * x.ln();
        let a = ln_a.exp();
        (ln_a + (-eps).ln_1p()).exp_m1() / (1.0 + a * x)
    }
}

impl LogDeficitOde {
    /// Partial derivative of the right-hand side in `x`.
    fn rhs_x(&self, x: f64, lam: f64) -> f64 {
        let p = self.params.p;
        let eps = lam.exp();
        let b = self.params.log_c + lam + (p - 2.0) * x.ln() + (-eps).ln_1p();
        let a = self.a(x, lam);
        let n = b.exp_m1();
        let d = 1.0 + a * x;
        let n_x = b.exp() * (p - 2.0) / x;
        let d_x = a * (p - 1.0);
        -((n_x * d - n * d_x) / (d * d)) / eps
    }
}

impl ScalarOde for LogDeficitOde {
    fn rhs(&self, x: f64, lam: f64) -> f64 {
        -self.gamma_prime(x, lam) / lam.exp()
    }

    fn jac(&self, x: f64, lam: f64) -> f64 {
        let eps = lam.exp();
        let a = self.a(x, lam);
        let n =
            ((self.params.log_c + lam + (self.params.p - 2.0) * x.ln()) + (-eps).ln_1p()).exp_m1();
        let d = 1.0 + a * x;
        -(a * (1.0 - 2.0 * eps) * d - n * (1.0 + 2.0 * a * x)) / (eps * d * d)
    }
}

/// Tolerances a solution was produced with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveTolerances {
    pub atol: f64,
    pub rtol: f64,
    pub resid_tol: f64,
}

pub const DEFAULT_RESID_TOL: f64 = 1e-9;

/// Default domain truncation for given parameters.
pub fn default_x_max(params: &Params) -> f64 {
    128.0 * params.x0().max(1.0)
}

/// A queryable numerical solution of the γ-ODE on `[x0, x_max]` together with
/// its linear extension on `[0, x0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSolution {
    params: Params,
    knots: Vec<f64>,
    log_deficits: Vec<f64>,
    log_deficit_slopes: Vec<f64>,
    log_deficit_curvatures: Vec<f64>,
    values: Vec<f64>,
    derivs: Vec<f64>,
    x_max: f64,
    interpolation: String,
    tolerances: SolveTolerances,
}

const INTERPOLATION: &str = "quintic-hermite/log-deficit";

/// Versioned on-disk form of a [`GammaSolution`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub format: String,
    pub version: u32,
    pub solution: GammaSolution,
}

pub const DOCUMENT_FORMAT: &str = "sharpmax/gamma-solution";
pub const DOCUMENT_VERSION: u32 = 1;

/// Integrate the γ-ODE from `x0` to `x_max` and check the solution's
/// invariants (range, monotonicity, concavity, ODE residual).
pub fn solve_gamma(params: Params, x_max: f64, resid_tol: f64) -> Result<GammaSolution> {
    solve_gamma_with(params, x_max, resid_tol, &StepOptions::default())
}

pub fn solve_gamma_with(
    params: Params,
    x_max: f64,
    resid_tol: f64,
    opts: &StepOptions,
) -> Result<GammaSolution> {
    let x0 = params.x0();
    if !(x_max > x0) || !x_max.is_finite() {
        return Err(Error::Domain(format!(
            "x_max = {x_max} must exceed x0 = {x0}"
        )));
    }
    if !(resid_tol > 0.0) {
        return Err(Error::Domain(format!(
            "resid_tol = {resid_tol} must be positive"
        )));
    }
    let ode_fn = LogDeficitOde { params };
    let opts = StepOptions {
        first_step: opts.first_step.max(1e-3 * x0),
        ..*opts
    };
    let opts = &opts;
    let mut knots = Vec::new();
    let mut lams = Vec::new();
    ode::integrate(&ode_fn, x0, x0.ln(), x_max, opts, |x, lam| {
        knots.push(x);
        lams.push(lam);
    })?;

    // Knot slopes come from a cubic spline through the log-deficits wherever
    // the problem is stiff: there the right-hand side varies like the (huge)
    // Jacobian off the slow manifold, so any local error at a knot would be
    // amplified into the interpolant by a factor of h|J|. Elsewhere the
    // right-hand side and its total derivative give a quintic Hermite
    // interpolant.
    let mut slopes = spline_slopes(&knots, &lams, ode_fn.rhs(x0, lams[0]));
    let mut curvs = spline_curvatures(&knots, &lams, &slopes);
    for i in 0..knots.len() {
        let (x, lam) = (knots[i], lams[i]);
        let jac = ode_fn.jac(x, lam);
        if i == 0 || local_spacing(&knots, i) * jac.abs() <= STIFF_SLOPE_SWITCH {
            let f = ode_fn.rhs(x, lam);
            slopes[i] = f;
            curvs[i] = ode_fn.rhs_x(x, lam) + jac * f;
        }
    }
    let mut derivs = Vec::with_capacity(knots.len());
    let mut values = Vec::with_capacity(knots.len());
    for (&lam, &m) in lams.iter().zip(&slopes) {
        derivs.push(-lam.exp() * m);
        values.push(-lam.exp_m1());
    }
    // the junction value is exact
    values[0] = 1.0 - x0;

    let sol = GammaSolution {
        params,
        knots,
        log_deficits: lams,
        log_deficit_slopes: slopes,
        log_deficit_curvatures: curvs,
        values,
        derivs,
        x_max,
        interpolation: INTERPOLATION.to_string(),
        tolerances: SolveTolerances {
            atol: opts.atol,
            rtol: opts.rtol,
            resid_tol,
        },
    };
    sol.validate()?;
    Ok(sol)
}

/// Knots with `h |J|` above this take their slope from the spline.
const STIFF_SLOPE_SWITCH: f64 = 2.0;

fn local_spacing(xs: &[f64], i: usize) -> f64 {
    let left = if i > 0 { xs[i] - xs[i - 1] } else { 0.0 };
    let right = if i + 1 < xs.len() {
        xs[i + 1] - xs[i]
    } else {
        0.0
    };
    left.max(right)
}

/// Slopes of the C2 cubic spline through `(xs, ys)` with the first slope
/// clamped to `m0` and the last taken from the cubic through the final four
/// points.
fn spline_slopes(xs: &[f64], ys: &[f64], m0: f64) -> Vec<f64> {
    let n = xs.len();
    let mut m = vec![0.0; n];
    m[0] = m0;
    if n < 4 {
        for i in 1..n {
            m[i] = (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
        }
        return m;
    }
    // derivative at xs[n-1] of the Lagrange cubic through the last four points
    let tail = &xs[n - 4..];
    let xe = tail[3];
    let mut end = 0.0;
    for j in 0..4 {
        let mut wj = 0.0;
        for k in 0..4 {
            if k == j {
                continue;
            }
            let mut term = 1.0 / (tail[j] - tail[k]);
            for l in 0..4 {
                if l != j && l != k {
                    term *= (xe - tail[l]) / (tail[j] - tail[l]);
                }
            }
            wj += term;
        }
        end += wj * ys[n - 4 + j];
    }
    m[n - 1] = end;
    if n == 2 {
        return m;
    }
    // tridiagonal system for m[1..n-1], Thomas algorithm
    let k = n - 2;
    let mut diag = vec![0.0; k];
    let mut upper = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    let mut lower = vec![0.0; k];
    for r in 0..k {
        let i = r + 1;
        let hl = xs[i] - xs[i - 1];
        let hr = xs[i + 1] - xs[i];
        let dl = (ys[i] - ys[i - 1]) / hl;
        let dr = (ys[i + 1] - ys[i]) / hr;
        lower[r] = hr;
        diag[r] = 2.0 * (hl + hr);
        upper[r] = hl;
        rhs[r] = 3.0 * (hr * dl + hl * dr);
    }
    rhs[0] -= lower[0] * m[0];
    rhs[k - 1] -= upper[k - 1] * m[n - 1];
    for r in 1..k {
        let w = lower[r] / diag[r - 1];
        diag[r] -= w * upper[r - 1];
        rhs[r] -= w * rhs[r - 1];
    }
    m[k] = rhs[k - 1] / diag[k - 1];
    for r in (0..k - 1).rev() {
        m[r + 1] = (rhs[r] - upper[r] * m[r + 2]) / diag[r];
    }
    m
}

/// Second derivatives of the Hermite cubic pieces defined by `slopes`,
/// taken from the interval to the right of each knot (left for the last).
fn spline_curvatures(xs: &[f64], ys: &[f64], slopes: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![0.0; n];
    for i in 0..n - 1 {
        let h = xs[i + 1] - xs[i];
        let d = (ys[i + 1] - ys[i]) / h;
        c[i] = (6.0 * d - 4.0 * slopes[i] - 2.0 * slopes[i + 1]) / h;
        if i == n - 2 {
            c[n - 1] = (-6.0 * d + 2.0 * slopes[i] + 4.0 * slopes[i + 1]) / h;
        }
    }
    c
}

impl GammaSolution {
    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivs(&self) -> &[f64] {
        &self.derivs
    }

    pub fn log_deficits(&self) -> &[f64] {
        &self.log_deficits
    }

    pub fn interpolation(&self) -> &str {
        &self.interpolation
    }

    pub fn tolerances(&self) -> &SolveTolerances {
        &self.tolerances
    }

    /// `H(x_max)`, the largest argument accepted by [`GammaSolution::h`].
    pub fn s_max(&self) -> f64 {
        self.x_max + *self.values.last().unwrap()
    }

    fn check_arg(&self, x: f64) -> Result<()> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("gamma evaluated at x = {x} < 0")));
        }
        if x > self.x_max {
            return Err(Error::Extrapolation {
                x,
                x_max: self.x_max,
            });
        }
        Ok(())
    }

    /// Log-deficit and its derivative at `x` in `[x0, x_max]`.
    fn interp(&self, x: f64) -> (f64, f64) {
        let n = self.knots.len();
        let i = self.knots.partition_point(|&k| k <= x).clamp(1, n - 1) - 1;
        let (xa, xb) = (self.knots[i], self.knots[i + 1]);
        let h = xb - xa;
        let t = (x - xa) / h;
        let (la, lb) = (self.log_deficits[i], self.log_deficits[i + 1]);
        let (ma, mb) = (self.log_deficit_slopes[i], self.log_deficit_slopes[i + 1]);
        let (ca, cb) = (
            self.log_deficit_curvatures[i],
            self.log_deficit_curvatures[i + 1],
        );
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let h3 = 0.5 * (t3 - 2.0 * t4 + t5);
        let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let d0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
        let d1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
        let d2 = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
        let d3 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4);
        let d4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
        // h5 = 1 - h0, written against la so that constant data is exact
        let lam =
            la + (1.0 - h0) * (lb - la) + h * (h1 * ma + h4 * mb) + h * h * (h2 * ca + h3 * cb);
        let dlam = -d0 * (lb - la) / h + d1 * ma + d4 * mb + h * (d2 * ca + d3 * cb);
        (lam, dlam)
    }

    /// `1 - γ(x)`, computed without cancellation.
    pub fn deficit(&self, x: f64) -> Result<f64> {
        self.check_arg(x)?;
        if x < self.params.x0() {
            Ok(1.0 - gamma_linear(x, &self.params))
        } else {
            Ok(self.interp(x).0.exp())
        }
    }

    /// `(γ(x), γ'(x))`. Below `x0` this is the linear extension; at `x0` both
    /// pieces agree to first order.
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        self.check_arg(x)?;
        if x < self.params.x0() {
            Ok((gamma_linear(x, &self.params), self.params.linear_slope()))
        } else {
            let (lam, dlam) = self.interp(x);
            Ok((-lam.exp_m1(), -lam.exp() * dlam))
        }
    }

    pub fn gamma(&self, x: f64) -> Result<f64> {
        self.eval(x).map(|v| v.0)
    }

    /// Right derivative at `x0` from the ODE side and the slope of the linear piece.
    pub fn junction_slopes(&self) -> (f64, f64) {
        (self.params.linear_slope(), self.derivs[0])
    }

    /// `γ'(1 + C(1-γ)x^(p-1)) - (-1 + C(1-γ)γ x^(p-2))` at `x >= x0`, with
    /// `1 - γ` taken from the stored deficit.
    pub fn ode_residual(&self, x: f64) -> Result<f64> {
        if x < self.params.x0() {
            return Err(Error::Domain(format!(
                "ODE residual requested at x = {x} < x0"
            )));
        }
        let eps = self.deficit(x)?;
        let (_, dg) = self.eval(x)?;
        let a = (self.params.log_c() + eps.ln() + (self.params.p() - 2.0) * x.ln()).exp();
        Ok(dg * (1.0 + a * x) - (-1.0 + a * (1.0 - eps)))
    }

    /// `(p-2)(1-γ(x)) - xγ'(x)`, non-positive for the exact solution.
    pub fn wazne_slack(&self, x: f64) -> Result<f64> {
        let eps = self.deficit(x)?;
        let (_, dg) = self.eval(x)?;
        Ok((self.params.p() - 2.0) * eps - x * dg)
    }

    /// `H(x) = x + γ(x)`.
    pub fn big_h(&self, x: f64) -> Result<f64> {
        Ok(x + self.gamma(x)?)
    }

    /// The inverse `h` of `H` restricted to `[x0, x_max]`; defined for
    /// `1 <= s <= H(x_max)`.
    pub fn h(&self, s: f64) -> Result<f64> {
        if !(s >= 1.0) {
            return Err(Error::Domain(format!("h evaluated at s = {s} < 1")));
        }
        let s_max = self.s_max();
        if s > s_max {
            return Err(Error::Extrapolation { x: s, x_max: s_max });
        }
        let x0 = self.params.x0();
        if s == 1.0 {
            return Ok(x0);
        }
        let lo = (s - 1.0).max(x0);
        let hi = s.min(self.x_max);
        // H(x) - s written as (x - (s-1)) - (1-γ(x)) to keep the deficit exact
        let shift = s - 1.0;
        let f = |x: f64| {
            let (lam, dlam) = self.interp(x);
            let eps = lam.exp();
            ((x - shift) - eps, 1.0 - eps * dlam)
        };
        let (f_lo, _) = f(lo);
        let (f_hi, _) = f(hi);
        if f_lo >= 0.0 {
            return Ok(lo);
        }
        if f_hi < 0.0 {
            return Err(Error::RootFinding(format!(
                "H(x) = {s} has no root in [{lo}, {hi}]"
            )));
        }
        // Newton inside a shrinking bracket; f' = 1 + γ' >= 1
        let (mut a, mut b) = (lo, hi);
        let mut x = (shift + self.interp(lo).0.exp()).clamp(a, b);
        for _ in 0..100 {
            let (fx, dfx) = f(x);
            if fx == 0.0 {
                return Ok(x);
            }
            if fx < 0.0 {
                a = x;
            } else {
                b = x;
            }
            let mut next = x - fx / dfx;
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs() || b - a <= 2.0 * f64::EPSILON * b {
                let (fn_, _) = f(next);
                return Ok(if fn_.abs() < fx.abs() { next } else { x });
            }
            x = next;
        }
        let r = find_root(
            |x| f(x).0,
            a,
            b,
            RootOptions {
                f_tol: 1e-15,
                x_tol: 0.0,
                max_iter: 200,
            },
        )?;
        Ok(r)
    }

    /// `(h(s), h'(s))` with `h'` from `1 / (1 + γ'(h(s)))`.
    pub fn h_with_prime(&self, s: f64) -> Result<(f64, f64)> {
        let r = self.h(s)?;
        let (_, dg) = self.eval(r.max(self.params.x0()))?;
        Ok((r, 1.0 / (1.0 + dg)))
    }

    /// `h'(s) = 1 / (1 + γ'(h(s)))`.
    pub fn h_prime(&self, s: f64) -> Result<f64> {
        self.h_with_prime(s).map(|v| v.1)
    }

    /// `h'(s)` from the product form obtained by substituting the ODE,
    /// `(1 + C(h-s+1)h^(p-1)) / (C(h-s+1)h^(p-2)s)`, where `h - s + 1` is the
    /// deficit `1 - γ(h(s))`.
    pub fn h_prime_product(&self, s: f64) -> Result<f64> {
        let r = self.h(s)?;
        let eps = self.deficit(r)?;
        let a = (self.params.log_c() + eps.ln() + (self.params.p() - 2.0) * r.ln()).exp();
        Ok((1.0 + a * r) / (a * s))
    }

    fn validate(&self) -> Result<()> {
        let fail = |x: f64, reason: String| Err(Error::Integration { x, reason });
        let tol = self.tolerances.resid_tol;
        for (i, (&x, &lam)) in self.knots.iter().zip(&self.log_deficits).enumerate() {
            let eps = lam.exp();
            if !(eps > 0.0 && eps < 1.0) {
                return fail(x, format!("gamma left (0, 1) at knot {i}"));
            }
            if self.derivs[i] < -tol {
                return fail(
                    x,
                    format!("gamma decreasing at knot {i}: {}", self.derivs[i]),
                );
            }
        }
        // concavity: chord slopes -(eps_{i+1} - eps_i)/dx are non-increasing
        let mut prev = f64::INFINITY;
        for i in 0..self.knots.len() - 1 {
            let dx = self.knots[i + 1] - self.knots[i];
            let e0 = self.log_deficits[i].exp();
            let e1 = self.log_deficits[i + 1].exp();
            let slope = -(e1 - e0) / dx;
            if slope > prev + tol {
                return fail(
                    self.knots[i],
                    format!("concavity violated by {:e}", slope - prev),
                );
            }
            prev = slope;
        }
        // interpolation quality: residual at interval midpoints
        for w in self.knots.windows(2) {
            let xm = 0.5 * (w[0] + w[1]);
            let r = self.ode_residual(xm)?;
            if !(r.abs() <= tol) {
                return fail(xm, format!("ODE residual {r:e} exceeds {tol:e}"));
            }
        }
        Ok(())
    }

    /// Write `(x, γ(x), γ'(x))` rows on a uniform grid.
    pub fn table(&self, from: f64, to: f64, step: f64) -> Result<Vec<[f64; 3]>> {
        if !(step > 0.0) || !(to >= from) {
            return Err(Error::Domain(format!(
                "bad table range [{from}, {to}] step {step}"
            )));
        }
        let n = ((to - from) / step + 1e-9).floor() as usize;
        let mut rows = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let x = if i == n && (from + n as f64 * step - to).abs() < 1e-9 * step {
                to
            } else {
                from + i as f64 * step
            };
            let (g, dg) = self.eval(x)?;
            rows.push([x, g, dg]);
        }
        Ok(rows)
    }

    pub fn to_document(&self) -> SolutionDocument {
        SolutionDocument {
            format: DOCUMENT_FORMAT.to_string(),
            version: DOCUMENT_VERSION,
            solution: self.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: SolutionDocument = serde_json::from_str(s)?;
        if doc.format != DOCUMENT_FORMAT || doc.version != DOCUMENT_VERSION {
            return Err(Error::Serde(format!(
                "unsupported document {} v{}",
                doc.format, doc.version
            )));
        }
        let sol = doc.solution;
        let n = sol.knots.len();
        if n < 2
            || [
                sol.log_deficits.len(),
                sol.log_deficit_slopes.len(),
                sol.log_deficit_curvatures.len(),
                sol.values.len(),
                sol.derivs.len(),
            ]
            .iter()
            .any(|&m| m != n)
            || sol.knots.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(Error::Serde("inconsistent knot arrays".into()));
        }
        sol.validate()?;
        Ok(sol)
    }

    /// Add a smooth bump of the given amplitude to the log-deficit. Exists so
    /// that the verification pipeline can be shown to reject a wrong curve.
    #[doc(hidden)]
    pub fn perturb_log_deficit(&mut self, center: f64, width: f64, amplitude: f64) {
        for i in 0..self.knots.len() {
            let u = (self.knots[i] - center) / width;
            let bump = amplitude * (-u * u).exp();
            let dbump = bump * (-2.0 * u / width);
            let ddbump = bump * (4.0 * u * u - 2.0) / (width * width);
            self.log_deficits[i] += bump;
            self.log_deficit_slopes[i] += dbump;
            self.log_deficit_curvatures[i] += ddbump;
            let eps = self.log_deficits[i].exp();
            self.values[i] = 1.0 - eps;
            self.derivs[i] = -eps * self.log_deficit_slopes[i];
        }
    }
}
