use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mc::{Bits, Integrand, PathGenerator, PathSample};
use super::Mode;
use crate::error::{Error, Result};

/// `X = |S|` for a simple random walk `S` with steps `±sqrt(dt)` started at
/// `s0`. Its Doob decomposition is explicit:
/// `dA = E(dX | past) = max(h, |S|) - |S|` and `dM = dX - dA`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectedWalk {
    pub s0: f64,
}

impl ReflectedWalk {
    /// One step of size `h`: new `S`, `dX` and the compensator increment `dA`.
    pub fn step(&self, s: f64, h: f64, up: bool) -> (f64, f64, f64) {
        let next = if up { s + h } else { s - h };
        let da = h.max(s.abs()) - s.abs();
        (next, next.abs() - s.abs(), da)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItoPath {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// `Y = Y0 + Σ φ dM + Σ ψ dA` along `X` from a [`ReflectedWalk`], with
/// `ψ_n = alpha · psi_n` so that `|ψ| <= alpha`, and `Y0 = φ_0 X0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItoScheme {
    pub walk: ReflectedWalk,
    pub phi: Integrand,
    pub psi: Integrand,
    pub alpha: f64,
    pub dt: f64,
    pub t_end: f64,
}

impl ItoScheme {
    pub fn new(
        walk: ReflectedWalk,
        phi: Integrand,
        psi: Integrand,
        alpha: f64,
        dt: f64,
        t_end: f64,
    ) -> Result<Self> {
        phi.validate()?;
        psi.validate()?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Domain(format!("alpha = {alpha} outside [0, 1]")));
        }
        if !(dt > 0.0) || !(t_end >= dt) || !t_end.is_finite() {
            return Err(Error::Domain(format!("need 0 < dt = {dt} <= T = {t_end}")));
        }
        Ok(Self {
            walk,
            phi,
            psi,
            alpha,
            dt,
            t_end,
        })
    }

    /// `steps` steps of `dt = t_end / steps`.
    pub fn with_steps(
        walk: ReflectedWalk,
        phi: Integrand,
        psi: Integrand,
        alpha: f64,
        steps: usize,
        t_end: f64,
    ) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Domain("steps must be positive".into()));
        }
        Self::new(walk, phi, psi, alpha, t_end / steps as f64, t_end)
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }

    fn run(&self, rng: &mut ChaCha8Rng, mut visit: impl FnMut(usize, f64, f64)) -> Result<()> {
        let h = self.dt.sqrt();
        let mut bits = Bits::new();
        let mut s = self.walk.s0;
        let mut x = s.abs();
        let mut y = self.phi.value(0, rng, &mut bits) * x;
        visit(0, x, y);
        for n in 1..=self.steps() {
            let phi = self.phi.value(n, rng, &mut bits);
            let psi = self.alpha * self.psi.value(n, rng, &mut bits);
            let (next, dx, da) = self.walk.step(s, h, bits.next(rng));
            if da < 0.0 {
                return Err(Error::Domain(format!(
                    "compensator increment {da} < 0 at step {n}"
                )));
            }
            y += phi * (dx - da) + psi * da;
            x += dx;
            s = next;
            visit(n, x, y);
        }
        Ok(())
    }
}

impl PathGenerator for ItoScheme {
    fn mode(&self) -> Mode {
        Mode::Submartingale { alpha: self.alpha }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<PathSample> {
        let mut out = PathSample {
            f_final: 0.0,
            fstar: 0.0,
            gstar: 0.0,
        };
        self.run(rng, |_, x, y| {
            out.f_final = x;
            out.fstar = out.fstar.max(x);
            out.gstar = out.gstar.max(y.abs());
        })?;
        Ok(out)
    }
}

/// One full path `(t, X, Y)` of the scheme.
pub fn discretize_ito(scheme: &ItoScheme, rng: &mut ChaCha8Rng) -> Result<ItoPath> {
    let n = scheme.steps();
    let mut path = ItoPath {
        t: Vec::with_capacity(n + 1),
        x: Vec::with_capacity(n + 1),
        y: Vec::with_capacity(n + 1),
    };
    scheme.run(rng, |k, x, y| {
        path.t.push(k as f64 * scheme.dt);
        path.x.push(x);
        path.y.push(y);
    })?;
    Ok(path)
}
