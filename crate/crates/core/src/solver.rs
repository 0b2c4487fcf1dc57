//! Scalar implicit step equation.
//!
//! Every implicit step, in the ODE and in each PDE cell, reduces to finding
//! `U` with
//!
//! ```text
//! rho(U) = a(U) + G(state; U) - rhs = 0,
//! ```
//!
//! where `G(state; U)` is the trial output of the model. With `a` strongly
//! increasing and `G` nondecreasing in `U`, `rho` is strictly increasing and
//! the root is unique.

use crate::curves::MonotoneCurve;
use crate::model::{Model, ModelError, ModelState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMethod {
    /// Newton with left-limit slopes.
    Newton,
    /// Bracket expansion followed by Brent's method.
    Bracket,
    /// Newton, switching to the bracketing solver when it stalls.
    #[default]
    NewtonWithBracketFallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { method: SolverMethod::default(), abs_tol: 1e-14, rel_tol: 1e-6, max_iter: 100 }
    }
}

impl SolverConfig {
    pub fn with_method(method: SolverMethod) -> Self {
        Self { method, ..Self::default() }
    }

    /// Residual tolerance for a right-hand side of size `scale`.
    pub fn tolerance(&self, scale: f64) -> f64 {
        self.abs_tol + self.rel_tol * scale.abs()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("Newton did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("could not bracket the root after 64 expansions")]
    BracketFailure,
    #[error("non-finite residual")]
    NonFinite,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Outcome of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSolution {
    pub u: f64,
    pub iterations: usize,
    pub fell_back: bool,
}

struct Residual<'a> {
    a: &'a MonotoneCurve,
    model: &'a Model,
    state: &'a ModelState,
    rhs: f64,
}

impl Residual<'_> {
    fn value(&self, u: f64) -> Result<f64, SolverError> {
        let r = self.a.eval(u) + self.model.evaluate_output(self.state, u)? - self.rhs;
        if r.is_finite() {
            Ok(r)
        } else {
            Err(SolverError::NonFinite)
        }
    }

    fn with_slope(&self, u: f64) -> Result<(f64, f64), SolverError> {
        let (g, dg) = self.model.evaluate_with_slope(self.state, u)?;
        let r = self.a.eval(u) + g - self.rhs;
        if !r.is_finite() {
            return Err(SolverError::NonFinite);
        }
        Ok((r, self.a.slope(u) + dg))
    }
}

/// Solves `a(U) + G(state; U) = rhs`, starting from `u_prev`.
pub fn solve_step(
    a: &MonotoneCurve,
    model: &Model,
    state: &ModelState,
    u_prev: f64,
    rhs: f64,
    cfg: &SolverConfig,
) -> Result<StepSolution, SolverError> {
    let res = Residual { a, model, state, rhs };
    match cfg.method {
        SolverMethod::Newton => newton(&res, u_prev, cfg, false),
        SolverMethod::Bracket => bracket(&res, u_prev, cfg).map(|(u, it)| StepSolution { u, iterations: it, fell_back: false }),
        SolverMethod::NewtonWithBracketFallback => newton(&res, u_prev, cfg, true),
    }
}

fn newton(res: &Residual, u0: f64, cfg: &SolverConfig, fallback: bool) -> Result<StepSolution, SolverError> {
    let tol_r = cfg.tolerance(res.rhs);
    let mut u = u0;
    let (mut r, mut slope) = res.with_slope(u)?;
    if r.abs() <= cfg.abs_tol {
        return Ok(StepSolution { u, iterations: 0, fell_back: false });
    }
    let mut best = r.abs();
    let mut stalled = 0;
    let patience = (cfg.max_iter / 4).max(1);
    for it in 1..=cfg.max_iter {
        if !(slope > 0.0 && slope.is_finite()) {
            break;
        }
        let du = -r / slope;
        u += du;
        (r, slope) = res.with_slope(u)?;
        if r.abs() <= cfg.abs_tol || (du.abs() <= cfg.abs_tol + cfg.rel_tol * u.abs() && r.abs() <= tol_r) {
            return Ok(StepSolution { u, iterations: it, fell_back: false });
        }
        if r.abs() < best {
            best = r.abs();
            stalled = 0;
        } else {
            stalled += 1;
        }
        if fallback && stalled >= patience {
            let (ub, ib) = bracket(res, u0, cfg)?;
            return Ok(StepSolution { u: ub, iterations: it + ib, fell_back: true });
        }
    }
    if fallback {
        let (ub, ib) = bracket(res, u0, cfg)?;
        return Ok(StepSolution { u: ub, iterations: cfg.max_iter + ib, fell_back: true });
    }
    Err(SolverError::NoConvergence { iterations: cfg.max_iter })
}

/// Expands a bracket away from `u0` and refines it with Brent's method.
/// Returns the root and the number of refinement iterations.
fn bracket(res: &Residual, u0: f64, cfg: &SolverConfig) -> Result<(f64, usize), SolverError> {
    let r0 = res.value(u0)?;
    if r0.abs() <= cfg.abs_tol {
        return Ok((u0, 0));
    }
    let dir = if r0 < 0.0 { 1.0 } else { -1.0 };
    let mut width = r0.abs().max(1e-8 * u0.abs().max(1.0));
    let (mut a, mut fa) = (u0, r0);
    let mut found = None;
    for _ in 0..64 {
        let b = u0 + dir * width;
        let fb = res.value(b)?;
        if fb == 0.0 || fb.signum() != r0.signum() {
            found = Some((b, fb));
            break;
        }
        a = b;
        fa = fb;
        width *= 2.0;
    }
    let (b, fb) = found.ok_or(SolverError::BracketFailure)?;
    brent(res, a, fa, b, fb, cfg)
}

fn brent(
    res: &Residual,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    cfg: &SolverConfig,
) -> Result<(f64, usize), SolverError> {
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for it in 1..=cfg.max_iter.max(200) {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * cfg.abs_tol;
        let m = 0.5 * (c - b);
        if fb.abs() <= cfg.abs_tol || m.abs() <= tol || fb == 0.0 {
            return Ok((b, it));
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = res.value(b)?;
    }
    Ok((b, cfg.max_iter.max(200)))
}
