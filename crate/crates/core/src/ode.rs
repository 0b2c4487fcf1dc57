//! Implicit Euler for `d/dt (a(u) + w) = f`, `w = G(u)`.
//!
//! Step `n` solves
//!
//! ```text
//! a(U^n) + G(state^{n-1}; U^n) = a(U^{n-1}) + W^{n-1} + tau F^n
//! ```
//!
//! and commits the model state at `U^n`. `F^n` is `f(t_n)` for smooth
//! sources and the cell average of `f` over `(t_{n-1}, t_n)` for piecewise
//! constant ones.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::curves::MonotoneCurve;
use crate::model::{InitMode, Model, ModelError};
use crate::solver::{solve_step, SolverConfig, SolverError};

/// Right-hand side `f(t)`.
#[derive(Clone)]
pub enum Source {
    /// Sampled pointwise at `t_n`.
    Smooth(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    /// `values[i]` on `(breaks[i-1], breaks[i])`; averaged exactly per step.
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
    /// `F^1, F^2, ...` given directly.
    Sampled(Vec<f64>),
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Smooth(_) => f.write_str("Smooth(..)"),
            Source::PiecewiseConstant { breaks, values } => {
                f.debug_struct("PiecewiseConstant").field("breaks", breaks).field("values", values).finish()
            }
            Source::Sampled(v) => f.debug_tuple("Sampled").field(&v.len()).finish(),
        }
    }
}

impl Source {
    pub fn smooth(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Source::Smooth(Arc::new(f))
    }

    /// `3.5 sin(t) exp(-t/10)`.
    pub fn damped_sine() -> Self {
        Source::smooth(|t| 3.5 * t.sin() * (-0.1 * t).exp())
    }

    /// Sign of the damped sine on `[0, t_final]`: `+1` on `(2k pi, (2k+1) pi)`,
    /// `-1` in between.
    pub fn damped_sine_sign(t_final: f64) -> Self {
        let pi = std::f64::consts::PI;
        let kmax = (t_final / pi).ceil() as usize + 1;
        let breaks: Vec<f64> = (1..=kmax).map(|k| k as f64 * pi).collect();
        let values = (0..=kmax).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        Source::PiecewiseConstant { breaks, values }
    }

    fn piece_integral(breaks: &[f64], values: &[f64], t0: f64, t1: f64) -> f64 {
        let mut acc = 0.0;
        let mut lo = t0;
        for (i, &v) in values.iter().enumerate() {
            let hi = breaks.get(i).copied().unwrap_or(f64::INFINITY).min(t1);
            if hi > lo {
                acc += v * (hi - lo);
                lo = hi;
            }
            if lo >= t1 {
                break;
            }
        }
        acc
    }

    /// `F^n` for the step from `t0` to `t1`.
    pub fn forcing(&self, n: usize, t0: f64, t1: f64) -> Result<f64, OdeError> {
        match self {
            Source::Smooth(f) => Ok(f(t1)),
            Source::PiecewiseConstant { breaks, values } => {
                Ok(Self::piece_integral(breaks, values, t0, t1) / (t1 - t0))
            }
            Source::Sampled(v) => v
                .get(n - 1)
                .copied()
                .ok_or_else(|| OdeError::InvalidProblem(format!("no sampled forcing for step {n}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OdeError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("the model has discontinuous outputs and cannot be stepped implicitly")]
    DiscontinuousModel,
    #[error("step {step}: {source}")]
    Solver { step: usize, source: SolverError },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone)]
pub struct OdeProblem {
    pub a: MonotoneCurve,
    pub model: Model,
    pub source: Source,
    pub u_init: f64,
    pub init: InitMode,
    pub t_final: f64,
    pub tau: f64,
}

impl OdeProblem {
    pub fn steps(&self) -> Result<usize, OdeError> {
        if !(self.tau > 0.0 && self.tau.is_finite() && self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(OdeError::InvalidProblem("need tau > 0 and T > 0".into()));
        }
        let ratio = self.t_final / self.tau;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * n.max(1.0) {
            return Err(OdeError::InvalidProblem(format!("T / tau = {ratio} is not an integer")));
        }
        Ok(n as usize)
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        Self { tau, ..self.clone() }
    }
}

/// Time series of one run, indexed from `n = 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OdeRun {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    /// Solver iterations per step (entry 0 unused).
    pub iterations: Vec<usize>,
    /// Steps on which Newton handed over to the bracketing solver.
    pub fallbacks: usize,
    /// `tau F^n` (entry 0 unused).
    pub increments: Vec<f64>,
    /// `sum_k mu_k |b_k(V^n_k) - b_k(V^{n-1}_k)|` (entry 0 unused).
    pub variation: Vec<f64>,
    /// Residual tolerance used by the solver at each step (entry 0 unused).
    pub tolerance: Vec<f64>,
}

impl OdeRun {
    pub fn mean_iterations(&self) -> f64 {
        let n = self.iterations.len().saturating_sub(1).max(1);
        self.iterations.iter().skip(1).sum::<usize>() as f64 / n as f64
    }
}

/// Runs the scheme to `t_final`.
pub fn integrate(p: &OdeProblem, cfg: &SolverConfig) -> Result<OdeRun, OdeError> {
    let steps = p.steps()?;
    if !p.model.is_continuous() {
        return Err(OdeError::DiscontinuousModel);
    }
    let mut state = p.model.init_state(p.u_init, &p.init)?;
    let mut run = OdeRun::default();
    let (mut u, mut w) = (p.u_init, p.model.output(&state));
    run.t.push(0.0);
    run.u.push(u);
    run.w.push(w);
    run.iterations.push(0);
    run.increments.push(0.0);
    run.variation.push(0.0);
    run.tolerance.push(0.0);
    let mut out_prev: Vec<f64> = state_outputs(&p.model, &state.v);
    for n in 1..=steps {
        let (t0, t1) = ((n - 1) as f64 * p.tau, n as f64 * p.tau);
        let inc = p.tau * p.source.forcing(n, t0, t1)?;
        let rhs = p.a.eval(u) + w + inc;
        let sol = solve_step(&p.a, &p.model, &state, u, rhs, cfg).map_err(|source| OdeError::Solver { step: n, source })?;
        u = sol.u;
        w = p.model.step(&mut state, u)?;
        let out = state_outputs(&p.model, &state.v);
        let var: f64 = out.iter().zip(&out_prev).map(|(x, y)| (x - y).abs()).sum();
        out_prev = out;
        run.t.push(t1);
        run.u.push(u);
        run.w.push(w);
        run.iterations.push(sol.iterations);
        run.fallbacks += sol.fell_back as usize;
        run.increments.push(inc);
        run.variation.push(var);
        run.tolerance.push(cfg.tolerance(rhs));
    }
    Ok(run)
}

pub(crate) fn state_outputs(model: &Model, v: &[f64]) -> Vec<f64> {
    model.hysterons.iter().zip(v).map(|(h, &x)| h.mu * h.truncation.eval(x)).collect()
}

/// Largest defect of the per-step balance
/// `|a(U^n) - a(U^{n-1})| + sum_k mu_k |b_k(V^n) - b_k(V^{n-1})| = tau |F^n|`.
pub fn balance_check(run: &OdeRun, a: &MonotoneCurve) -> f64 {
    (1..run.u.len())
        .map(|n| ((a.eval(run.u[n]) - a.eval(run.u[n - 1])).abs() + run.variation[n] - run.increments[n].abs()).abs())
        .fold(0.0, f64::max)
}

/// Errors against a fine reference run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub taus: Vec<f64>,
    pub tau_fine: f64,
    pub e_u: Vec<f64>,
    pub e_w: Vec<f64>,
    pub p_u: f64,
    pub p_w: f64,
}

/// Least-squares slope of `ln e` against `ln h`.
pub fn fitted_order(h: &[f64], e: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> =
        h.iter().zip(e).filter(|(_, &e)| e > 0.0).map(|(&h, &e)| (h.ln(), e.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Runs every `tau` and a reference at `tau_fine`, in parallel, and reports
/// `max_n |U^n - U_fine(t_n)|` and the same for `W`.
pub fn convergence_study(
    p: &OdeProblem,
    taus: &[f64],
    tau_fine: f64,
    cfg: &SolverConfig,
) -> Result<ConvergenceReport, OdeError> {
    let mut all: Vec<f64> = taus.to_vec();
    all.push(tau_fine);
    let runs: Vec<Result<OdeRun, OdeError>> = all.par_iter().map(|&tau| integrate(&p.with_tau(tau), cfg)).collect();
    let mut runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let fine = runs.pop().expect("reference run");
    let mut e_u = Vec::with_capacity(taus.len());
    let mut e_w = Vec::with_capacity(taus.len());
    for (run, &tau) in runs.iter().zip(taus) {
        let ratio = (tau / tau_fine).round();
        if (tau / tau_fine - ratio).abs() > 1e-9 * ratio {
            return Err(OdeError::InvalidProblem(format!("tau {tau} is not a multiple of {tau_fine}")));
        }
        let r = ratio as usize;
        let (mut eu, mut ew) = (0.0f64, 0.0f64);
        for n in 0..run.u.len() {
            eu = eu.max((run.u[n] - fine.u[n * r]).abs());
            ew = ew.max((run.w[n] - fine.w[n * r]).abs());
        }
        e_u.push(eu);
        e_w.push(ew);
    }
    Ok(ConvergenceReport {
        p_u: fitted_order(taus, &e_u),
        p_w: fitted_order(taus, &e_w),
        taus: taus.to_vec(),
        tau_fine,
        e_u,
        e_w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;
    use proptest::prelude::*;

    #[test]
    fn piecewise_constant_average() {
        let s = Source::PiecewiseConstant { breaks: vec![1.0], values: vec![2.0, -1.0] };
        assert_eq!(s.forcing(1, 0.5, 1.5).unwrap(), 0.5);
        assert_eq!(s.forcing(1, 0.0, 1.0).unwrap(), 2.0);
        let sg = Source::damped_sine_sign(10.0);
        let pi = std::f64::consts::PI;
        assert_eq!(sg.forcing(1, pi - 0.5, pi + 0.5).unwrap(), 0.0);
        assert_eq!(sg.forcing(1, 2.0 * pi + 0.1, 2.0 * pi + 0.2).unwrap(), 1.0);
    }

    #[test]
    fn without_hysteresis_matches_quadrature() {
        // a = id, tiny linear play ~ no hysteresis: U^n = u0 + tau sum F / (1 + mu)
        let m = Model::from_rows(ModelKind::KLinear, &[[1.0, 0.0, 0.0, 0.0]]).unwrap();
        let p = OdeProblem {
            a: MonotoneCurve::Identity,
            model: m,
            source: Source::smooth(|t| t.cos()),
            u_init: 0.0,
            init: InitMode::LeftCurve,
            t_final: 1.0,
            tau: 0.01,
        };
        let run = integrate(&p, &SolverConfig::default()).unwrap();
        let exact = 1.0f64.sin() / 2.0;
        assert!((run.u[100] - exact).abs() < 0.01);
    }

    #[test]
    fn relay_models_are_rejected() {
        let m = Model::from_rows(ModelKind::KPreisachRaw, &[[1.0, 0.0, 1.0, 1.0]]).unwrap();
        let p = OdeProblem {
            a: MonotoneCurve::Identity,
            model: m,
            source: Source::Sampled(vec![1.0]),
            u_init: 0.0,
            init: InitMode::LeftCurve,
            t_final: 1.0,
            tau: 1.0,
        };
        assert_eq!(integrate(&p, &SolverConfig::default()), Err(OdeError::DiscontinuousModel));
    }

    #[test]
    fn rejects_non_integral_step_count() {
        let m = Model::from_rows(ModelKind::KLinear, &[[1.0, 0.0, 1.0, 0.0]]).unwrap();
        let p = OdeProblem {
            a: MonotoneCurve::Identity,
            model: m,
            source: Source::Sampled(vec![]),
            u_init: 0.0,
            init: InitMode::LeftCurve,
            t_final: 1.0,
            tau: 0.3,
        };
        assert!(matches!(p.steps(), Err(OdeError::InvalidProblem(_))));
    }

    #[test]
    fn order_fit() {
        let h = [0.1, 0.01, 0.001];
        let e: Vec<f64> = h.iter().map(|x| 3.0 * x * x).collect();
        assert!((fitted_order(&h, &e) - 2.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn balance_holds_for_random_forcing(f in prop::collection::vec(-3.0..3.0f64, 1..60)) {
            let m = Model::from_rows(ModelKind::KNonlinear, &[[1.0, 0.0, 1.0, 0.5], [2.0, 0.3, 0.8, 0.25]]).unwrap();
            let tau = 0.1;
            let p = OdeProblem {
                a: MonotoneCurve::Identity,
                model: m,
                t_final: tau * f.len() as f64,
                source: Source::Sampled(f),
                u_init: 0.0,
                init: InitMode::LeftCurve,
                tau,
            };
            let run = integrate(&p, &SolverConfig::default()).unwrap();
            let worst = run.tolerance.iter().cloned().fold(0.0, f64::max);
            prop_assert!(balance_check(&run, &p.a) <= 4.0 * worst);
            let (umin, umax) = (run.u.iter().cloned().fold(f64::INFINITY, f64::min), run.u.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            prop_assert!(umin.is_finite() && umax.is_finite());
        }
    }
}
