//! Explicit upwind transport with an implicit hysteresis storage term.
//!
//! For `d/dt (a(u) + w) + d/dx alpha(u) = 0`, `w = G(u)`, on nodes
//! `x_j = x_min + j h`, `j = 1..J`, each step computes
//!
//! ```text
//! rhs_j = a(U_j) + W_j - (tau / h) (alpha(U_j) - alpha(U_{j-1}))
//! ```
//!
//! from the previous level and then solves `a(U) + G(state_j; U) = rhs_j`
//! independently in every cell. `U_0` is a ghost value taken from the inflow
//! at the previous time level. Nothing is read to the right of `x_J`, so the
//! outflow needs no condition.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::curves::MonotoneCurve;
use crate::model::{InitMode, Model, ModelError, ModelState};
use crate::ode::{fitted_order, state_outputs};
use crate::solver::{solve_step, SolverConfig, SolverError};

/// Cells per rayon task below which a step runs serially.
const PAR_THRESHOLD: usize = 256;

/// Initial profile `u_init(x)`.
#[derive(Clone)]
pub enum Profile {
    Constant(f64),
    /// `values[i]` for `breaks[i-1] <= x < breaks[i]`.
    Steps { breaks: Vec<f64>, values: Vec<f64> },
    /// Linear interpolation between points, constant beyond the ends.
    Points(Vec<(f64, f64)>),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    /// One value per node `j = 1..J`.
    Cells(Vec<f64>),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Profile::Steps { breaks, values } => {
                f.debug_struct("Steps").field("breaks", breaks).field("values", values).finish()
            }
            Profile::Points(p) => f.debug_tuple("Points").field(p).finish(),
            Profile::Function(_) => f.write_str("Function(..)"),
            Profile::Cells(c) => f.debug_tuple("Cells").field(&c.len()).finish(),
        }
    }
}

impl Profile {
    pub fn function(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Profile::Function(Arc::new(f))
    }

    fn sample(&self, x: &[f64]) -> Result<Vec<f64>, PdeError> {
        let at = |x: f64| match self {
            Profile::Constant(c) => *c,
            Profile::Steps { breaks, values } => {
                let i = breaks.partition_point(|&b| b <= x);
                values[i.min(values.len() - 1)]
            }
            Profile::Points(p) => interpolate(p, x),
            Profile::Function(f) => f(x),
            Profile::Cells(_) => unreachable!(),
        };
        match self {
            Profile::Cells(c) if c.len() == x.len() => Ok(c.clone()),
            Profile::Cells(c) => {
                Err(PdeError::InvalidProblem(format!("{} cell values for {} nodes", c.len(), x.len())))
            }
            Profile::Steps { breaks, values } if values.len() != breaks.len() + 1 => {
                Err(PdeError::InvalidProblem("steps need one more value than breaks".into()))
            }
            Profile::Points(p) if p.is_empty() => Err(PdeError::InvalidProblem("empty profile".into())),
            _ => Ok(x.iter().map(|&x| at(x)).collect()),
        }
    }
}

fn interpolate(p: &[(f64, f64)], x: f64) -> f64 {
    let i = p.partition_point(|q| q.0 <= x);
    if i == 0 {
        return p[0].1;
    }
    if i == p.len() {
        return p[p.len() - 1].1;
    }
    let ((x0, y0), (x1, y1)) = (p[i - 1], p[i]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Value of `u` entering at `x_min`.
#[derive(Clone)]
pub enum Inflow {
    Dirichlet(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    /// Ghost value copies the first node.
    ZeroGradient,
}

impl fmt::Debug for Inflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Inflow::Dirichlet(_) => f.write_str("Dirichlet(..)"),
            Inflow::ZeroGradient => f.write_str("ZeroGradient"),
        }
    }
}

impl Inflow {
    pub fn dirichlet(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Inflow::Dirichlet(Arc::new(f))
    }

    fn ghost(&self, t: f64, first: f64) -> f64 {
        match self {
            Inflow::Dirichlet(f) => f(t),
            Inflow::ZeroGradient => first,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PdeError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("CFL violated: lambda {lambda} times max flux slope {speed} exceeds 1")]
    Cfl { lambda: f64, speed: f64 },
    #[error("the model has discontinuous outputs and cannot be stepped implicitly")]
    DiscontinuousModel,
    #[error("step {step}, cell {cell}: {source}")]
    Solver { step: usize, cell: usize, source: SolverError },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone)]
pub struct PdeProblem {
    pub a: MonotoneCurve,
    pub flux: MonotoneCurve,
    pub model: Model,
    pub x_min: f64,
    pub x_max: f64,
    pub h: f64,
    pub u_init: Profile,
    /// Initial state of every cell, relative to its own `u_init`.
    pub init: InitMode,
    pub inflow: Inflow,
    pub t_final: f64,
    /// `tau / h`.
    pub lambda: f64,
}

/// Outcome of [`cfl_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cfl {
    pub max_speed: f64,
    pub ok: bool,
}

/// Samples `alpha'` on `[lo, hi]` and tests `lambda max alpha' <= 1`.
pub fn cfl_check(flux: &MonotoneCurve, lambda: f64, lo: f64, hi: f64) -> Cfl {
    let n = 2000;
    let mut speed = flux.slope(lo).max(flux.slope(hi));
    for i in 0..=n {
        let u = lo + (hi - lo) * i as f64 / n as f64;
        speed = speed.max(flux.slope(u));
    }
    Cfl { max_speed: speed, ok: lambda * speed <= 1.0 + 1e-12 }
}

impl PdeProblem {
    pub fn cells(&self) -> Result<usize, PdeError> {
        if !(self.h > 0.0 && self.x_max > self.x_min && self.h.is_finite()) {
            return Err(PdeError::InvalidProblem("need h > 0 and x_max > x_min".into()));
        }
        let ratio = (self.x_max - self.x_min) / self.h;
        let j = ratio.round();
        if (ratio - j).abs() > 1e-9 * j.max(1.0) {
            return Err(PdeError::InvalidProblem(format!("domain length / h = {ratio} is not an integer")));
        }
        Ok(j as usize)
    }

    /// Nodes `x_1..x_J`.
    pub fn nodes(&self) -> Result<Vec<f64>, PdeError> {
        Ok((1..=self.cells()?).map(|j| self.x_min + j as f64 * self.h).collect())
    }

    pub fn tau(&self) -> f64 {
        self.lambda * self.h
    }

    /// Time levels `t_0 = 0 < ... < t_N = T`; the last step may be shorter.
    pub fn times(&self) -> Result<Vec<f64>, PdeError> {
        let tau = self.tau();
        if !(tau > 0.0 && self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(PdeError::InvalidProblem("need lambda > 0 and T > 0".into()));
        }
        let n = (self.t_final / tau - 1e-9).ceil().max(1.0) as usize;
        let mut t: Vec<f64> = (0..n).map(|i| i as f64 * tau).collect();
        t.push(self.t_final);
        Ok(t)
    }

    pub fn with_h(&self, h: f64) -> Self {
        Self { h, ..self.clone() }
    }

    /// Checks CFL over the range of the initial data and the inflow.
    pub fn check(&self) -> Result<Cfl, PdeError> {
        let u0 = self.u_init.sample(&self.nodes()?)?;
        let mut lo = u0.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut hi = u0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if let Inflow::Dirichlet(f) = &self.inflow {
            for t in self.times()? {
                let v = f(t);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(PdeError::InvalidProblem("non-finite initial or inflow data".into()));
        }
        let cfl = cfl_check(&self.flux, self.lambda, lo, hi);
        if !cfl.ok {
            return Err(PdeError::Cfl { lambda: self.lambda, speed: cfl.max_speed });
        }
        Ok(cfl)
    }
}

/// Per-node unknowns at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub n: usize,
    pub t: f64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub states: Vec<ModelState>,
}

impl GridState {
    pub fn initial(p: &PdeProblem) -> Result<Self, PdeError> {
        let u = p.u_init.sample(&p.nodes()?)?;
        let states = u.iter().map(|&u| p.model.init_state(u, &p.init)).collect::<Result<Vec<_>, _>>()?;
        let w = states.iter().map(|s| p.model.output(s)).collect();
        Ok(Self { n: 0, t: 0.0, u, w, states })
    }

    /// `sum_j (a(U_j) + W_j) h`.
    pub fn mass(&self, a: &MonotoneCurve, h: f64) -> f64 {
        self.u.iter().zip(&self.w).map(|(&u, &w)| a.eval(u) + w).sum::<f64>() * h
    }
}

/// Counters from one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    /// `tau (alpha(ghost) - alpha(U_J))` with previous-level values.
    pub boundary_flux: f64,
    pub iterations: usize,
    pub fallbacks: usize,
    /// `h sum_j tol_j`, the conservation slack the solver leaves.
    pub tolerance: f64,
}

/// Advances `state` to `t_new`.
pub fn pde_step(p: &PdeProblem, state: &mut GridState, t_new: f64, cfg: &SolverConfig) -> Result<StepStats, PdeError> {
    let tau = t_new - state.t;
    let lam = tau / p.h;
    let j_max = state.u.len();
    let ghost = p.inflow.ghost(state.t, state.u[0]);
    let alpha: Vec<f64> = state.u.iter().map(|&u| p.flux.eval(u)).collect();
    let alpha_ghost = p.flux.eval(ghost);
    let step = state.n + 1;
    let solve = |j: usize, u: &mut f64, w: &mut f64, s: &mut ModelState| -> Result<(usize, bool, f64), PdeError> {
        let left = if j == 0 { alpha_ghost } else { alpha[j - 1] };
        let rhs = p.a.eval(*u) + *w - lam * (alpha[j] - left);
        let sol = solve_step(&p.a, &p.model, s, *u, rhs, cfg)
            .map_err(|source| PdeError::Solver { step, cell: j + 1, source })?;
        *u = sol.u;
        *w = p.model.step(s, sol.u)?;
        Ok((sol.iterations, sol.fell_back, cfg.tolerance(rhs)))
    };
    let results: Vec<(usize, bool, f64)> = if j_max >= PAR_THRESHOLD {
        state
            .u
            .par_iter_mut()
            .zip(state.w.par_iter_mut())
            .zip(state.states.par_iter_mut())
            .enumerate()
            .map(|(j, ((u, w), s))| solve(j, u, w, s))
            .collect::<Result<_, _>>()?
    } else {
        state
            .u
            .iter_mut()
            .zip(state.w.iter_mut())
            .zip(state.states.iter_mut())
            .enumerate()
            .map(|(j, ((u, w), s))| solve(j, u, w, s))
            .collect::<Result<_, _>>()?
    };
    state.n = step;
    state.t = t_new;
    let mut stats = StepStats { boundary_flux: tau * (alpha_ghost - alpha[j_max - 1]), ..Default::default() };
    for (it, fb, tol) in results {
        stats.iterations += it;
        stats.fallbacks += fb as usize;
        stats.tolerance += tol * p.h;
    }
    Ok(stats)
}

/// Profile at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

/// What [`integrate`] records besides the final state.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Requested times; each is matched to the nearest time level.
    pub snapshots: Vec<f64>,
    /// Keep every `(U_j^n, W_j^n)`.
    pub trace: bool,
    /// Accumulate the space-time total variation of `a(U)` and the hysteron
    /// outputs.
    pub total_variation: bool,
}

#[derive(Debug, Clone)]
pub struct PdeRun {
    pub x: Vec<f64>,
    pub times: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub trace: Vec<(f64, f64)>,
    pub state: GridState,
    /// Mass after each level.
    pub mass: Vec<f64>,
    /// Per-step statistics (entry 0 unused).
    pub steps: Vec<StepStats>,
    pub total_variation: Option<f64>,
}

impl PdeRun {
    /// Largest `|mass^n - mass^{n-1} - boundary flux|` and the largest
    /// slack the solver tolerance allows on that step.
    pub fn conservation_defect(&self) -> (f64, f64) {
        (1..self.mass.len()).fold((0.0f64, 0.0f64), |(d, s), n| {
            let defect = (self.mass[n] - self.mass[n - 1] - self.steps[n].boundary_flux).abs();
            (d.max(defect), s.max(self.steps[n].tolerance))
        })
    }

    pub fn mean_iterations(&self) -> f64 {
        let cells = self.x.len() * (self.steps.len() - 1).max(1);
        self.steps.iter().map(|s| s.iterations).sum::<usize>() as f64 / cells as f64
    }

    pub fn fallbacks(&self) -> usize {
        self.steps.iter().map(|s| s.fallbacks).sum()
    }
}

/// Thread count from `HYST_THREADS` (unset or 0 means rayon's default).
pub fn thread_limit() -> Option<usize> {
    std::env::var("HYST_THREADS").ok()?.trim().parse::<usize>().ok().filter(|&n| n > 0)
}

fn with_threads<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match thread_limit().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

fn variation(p: &PdeProblem, u: &[f64], s: &[ModelState]) -> Vec<Vec<f64>> {
    u.iter().zip(s).map(|(&u, s)| {
        let mut c = state_outputs(&p.model, &s.v);
        c.push(p.a.eval(u));
        c
    })
    .collect()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Runs the scheme to `t_final`.
pub fn integrate(p: &PdeProblem, opts: &RunOptions, cfg: &SolverConfig) -> Result<PdeRun, PdeError> {
    if !p.model.is_continuous() {
        return Err(PdeError::DiscontinuousModel);
    }
    p.check()?;
    let times = p.times()?;
    let x = p.nodes()?;
    let mut state = GridState::initial(p)?;
    let wanted: Vec<usize> = opts
        .snapshots
        .iter()
        .map(|&t| {
            let i = times.partition_point(|&s| s < t).min(times.len() - 1);
            if i > 0 && (t - times[i - 1]).abs() <= (times[i] - t).abs() {
                i - 1
            } else {
                i
            }
        })
        .collect();
    let mut run = PdeRun {
        x,
        times: times.clone(),
        snapshots: Vec::new(),
        trace: Vec::new(),
        mass: vec![state.mass(&p.a, p.h)],
        steps: vec![StepStats::default()],
        total_variation: opts.total_variation.then_some(0.0),
        state: state.clone(),
    };
    let record = |run: &mut PdeRun, st: &GridState| {
        for (k, &n) in wanted.iter().enumerate() {
            if n == st.n {
                run.snapshots.push(Snapshot { t: opts.snapshots[k], u: st.u.clone(), w: st.w.clone() });
            }
        }
        if opts.trace {
            run.trace.extend(st.u.iter().cloned().zip(st.w.iter().cloned()));
        }
    };
    record(&mut run, &state);
    let mut comps = opts.total_variation.then(|| variation(p, &state.u, &state.states));
    with_threads(|| -> Result<(), PdeError> {
        for &t in &times[1..] {
            let tau = t - state.t;
            if let (Some(tv), Some(prev)) = (run.total_variation.as_mut(), comps.as_ref()) {
                *tv += tau * prev.windows(2).map(|c| l1(&c[1], &c[0])).sum::<f64>();
            }
            let stats = pde_step(p, &mut state, t, cfg)?;
            if let Some(prev) = comps.as_mut() {
                let next = variation(p, &state.u, &state.states);
                let dt: f64 = next.iter().zip(prev.iter()).map(|(a, b)| l1(a, b)).sum();
                *run.total_variation.as_mut().expect("tracked") += p.h * dt;
                *prev = next;
            }
            run.mass.push(state.mass(&p.a, p.h));
            run.steps.push(stats);
            record(&mut run, &state);
        }
        Ok(())
    })?;
    run.state = state;
    Ok(run)
}

/// Errors of coarse runs against a fine reference at `t_final`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeConvergenceReport {
    pub hs: Vec<f64>,
    pub h_fine: f64,
    /// `sum_j |U_j - U_fine(x_j)| h`.
    pub e_u: Vec<f64>,
    pub e_w: Vec<f64>,
    pub p_u: f64,
    pub p_w: f64,
}

fn sample_at(x: &[f64], y: &[f64], at: f64) -> f64 {
    let i = x.partition_point(|&s| s < at);
    if i < x.len() && (x[i] - at).abs() <= 1e-9 * (1.0 + at.abs()) {
        return y[i];
    }
    if i == 0 {
        return y[0];
    }
    if i == x.len() {
        return y[x.len() - 1];
    }
    y[i - 1] + (y[i] - y[i - 1]) * (at - x[i - 1]) / (x[i] - x[i - 1])
}

/// Runs every `h` and the reference `h_fine` at the problem's `lambda`.
pub fn pde_convergence(
    p: &PdeProblem,
    hs: &[f64],
    h_fine: f64,
    cfg: &SolverConfig,
) -> Result<PdeConvergenceReport, PdeError> {
    let mut all = hs.to_vec();
    all.push(h_fine);
    let opts = RunOptions::default();
    let runs: Vec<Result<PdeRun, PdeError>> = all.par_iter().map(|&h| integrate(&p.with_h(h), &opts, cfg)).collect();
    let mut runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let fine = runs.pop().expect("reference run");
    let (mut e_u, mut e_w) = (Vec::new(), Vec::new());
    for (run, &h) in runs.iter().zip(hs) {
        let (mut eu, mut ew) = (0.0, 0.0);
        for (j, &x) in run.x.iter().enumerate() {
            eu += (run.state.u[j] - sample_at(&fine.x, &fine.state.u, x)).abs();
            ew += (run.state.w[j] - sample_at(&fine.x, &fine.state.w, x)).abs();
        }
        e_u.push(eu * h);
        e_w.push(ew * h);
    }
    Ok(PdeConvergenceReport {
        p_u: fitted_order(hs, &e_u),
        p_w: fitted_order(hs, &e_w),
        hs: hs.to_vec(),
        h_fine,
        e_u,
        e_w,
    })
}
