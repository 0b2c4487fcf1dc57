//! Fitting models to a pair of primary curves.
//!
//! The outer boundary of a hysteresis graph is described by a
//! [`GeneralizedTrapezoid`]: a left (desorption) curve and a right
//! (adsorption) curve over an output range `[w_min, w_max]`. Several model
//! families can reproduce such a boundary:
//!
//! * [`calibrate_generalized`]: one curve-bounded hysteron, exact.
//! * [`calibrate_trapezoid`]: `K = m n` ramp hysterons for straight sides.
//! * [`calibrate_hierarchical`]: a stack of trapezoids over a partition of the
//!   output range, for curved sides.
//! * [`calibrate_preisach`]: `K` relays (raw, ramp regularized, or erf).
//! * [`calibrate_linear_play`]: untruncated plays for a convex right curve.

use crate::curves::{CurveError, MonotoneCurve, PiecewiseLinear};
use crate::model::{Hysteron, InitMode, Model, ModelError, ModelKind};
use crate::play::Truncation;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("trapezoid side has zero width")]
    DegenerateSlope,
    #[error("weight {mu} of hysteron {index} is negative; the right curve is not convex")]
    NegativeWeight { index: usize, mu: f64 },
    #[error("invalid calibration input: {0}")]
    InvalidInput(String),
    #[error("iteration budget exhausted; best boundary error {}", .best.boundary_error)]
    BudgetExceeded { best: Box<HierarchicalFit> },
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Trapezoid with straight sides through `(alpha, w_min)`, `(beta, w_min)`,
/// `(b, w_max)` and `(a, w_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trapezoid {
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub w_min: f64,
    pub w_max: f64,
}

impl Trapezoid {
    pub fn new(alpha: f64, beta: f64, a: f64, b: f64, w_min: f64, w_max: f64) -> Result<Self, CalibrationError> {
        let t = Self { alpha, beta, a, b, w_min, w_max };
        if [alpha, beta, a, b, w_min, w_max].iter().any(|x| !x.is_finite()) {
            return Err(CalibrationError::InvalidInput("non-finite vertex".into()));
        }
        if !(w_min < w_max) {
            return Err(CalibrationError::InvalidInput(format!("empty output range [{w_min}, {w_max}]")));
        }
        if alpha > beta || a > b || a < alpha || b < beta {
            return Err(CalibrationError::InvalidInput(format!(
                "vertices out of order: alpha {alpha}, beta {beta}, A {a}, B {b}"
            )));
        }
        Ok(t)
    }
}

/// Hysteresis graph bounded by two monotone curves over `[w_min, w_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedTrapezoid {
    pub left: MonotoneCurve,
    pub right: MonotoneCurve,
    pub w_min: f64,
    pub w_max: f64,
}

impl GeneralizedTrapezoid {
    pub fn new(left: MonotoneCurve, right: MonotoneCurve, w_min: f64, w_max: f64) -> Result<Self, CalibrationError> {
        if !(w_min.is_finite() && w_max.is_finite() && w_min < w_max) {
            return Err(CalibrationError::InvalidInput(format!("bad output range [{w_min}, {w_max}]")));
        }
        let g = Self { left, right, w_min, w_max };
        g.vertices()?;
        Ok(g)
    }

    /// Corner points, using the smallest preimage on the left curve and the
    /// largest on the right curve.
    pub fn vertices(&self) -> Result<Trapezoid, CalibrationError> {
        let alpha = self.left.inverse_min(self.w_min)?;
        let beta = self.right.inverse_max(self.w_min)?;
        let a = self.left.inverse_min(self.w_max)?;
        let b = self.right.inverse_max(self.w_max)?;
        Trapezoid::new(alpha, beta, a, b, self.w_min, self.w_max)
    }

    /// Graph of two Langmuir isotherms `V B u / (1 + B u)`. The left curve is
    /// the upper envelope of both, and the range ends where they cross.
    pub fn langmuir_pair(vl: f64, bl: f64, vr: f64, br: f64) -> Result<Self, CalibrationError> {
        let (sl, sr) = (vl * bl, vr * br);
        if !(sl > sr) || [vl, bl, vr, br].iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(CalibrationError::InvalidInput("left isotherm must start steeper".into()));
        }
        let denom = sr * bl - sl * br;
        if !(denom > 0.0) {
            return Err(CalibrationError::InvalidInput("isotherms do not cross".into()));
        }
        let u_cross = (sl - sr) / denom;
        let gl = MonotoneCurve::langmuir(vl, bl);
        let gr = MonotoneCurve::langmuir(vr, br);
        let w_max = gr.eval(u_cross);
        let left = MonotoneCurve::UpperEnvelope { parts: vec![gl, gr.clone()] };
        Self::new(left, gr, 0.0, w_max)
    }

    /// Graph from sampled curves whose output ranges may differ; the range
    /// is cut to the common part.
    pub fn from_samples(left: Vec<(f64, f64)>, right: Vec<(f64, f64)>) -> Result<Self, CalibrationError> {
        let l = PiecewiseLinear::from_samples(left)?;
        let r = PiecewiseLinear::from_samples(right)?;
        let (lp, rp) = (l.points(), r.points());
        let w_min = lp[0].1.max(rp[0].1);
        let w_max = lp[lp.len() - 1].1.min(rp[rp.len() - 1].1);
        Self::new(
            MonotoneCurve::PiecewiseLinear { points: l },
            MonotoneCurve::PiecewiseLinear { points: r },
            w_min,
            w_max,
        )
    }
}

/// Which side keeps its slope when the slope ratio is rounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pin {
    #[default]
    Left,
    Right,
}

/// Best fraction `m / n` with `m n <= kmax`. Ties go to the smaller product,
/// then to the smaller numerator.
///
/// ```
/// assert_eq!(hysteresis::calibration::rational_approx(0.5, 100).unwrap(), (1, 2));
/// ```
pub fn rational_approx(r: f64, kmax: usize) -> Result<(usize, usize), CalibrationError> {
    if !(r.is_finite() && r > 0.0) || kmax == 0 {
        return Err(CalibrationError::InvalidInput(format!("cannot approximate {r} with budget {kmax}")));
    }
    let mut best = (1usize, 1usize);
    let mut best_err = (r - 1.0).abs();
    let better = |err: f64, m: usize, n: usize, be: f64, b: (usize, usize)| {
        err < be || err == be && (m * n < b.0 * b.1 || m * n == b.0 * b.1 && m < b.0)
    };
    for n in 1..=kmax {
        let mmax = kmax / n;
        if mmax == 0 {
            break;
        }
        let f = (r * n as f64).floor().max(1.0) as usize;
        for m in [f, f + 1] {
            if m < 1 || m > mmax {
                continue;
            }
            let err = (r - m as f64 / n as f64).abs();
            if better(err, m, n, best_err, best) {
                best = (m, n);
                best_err = err;
            }
        }
        if f > mmax {
            let err = (r - mmax as f64 / n as f64).abs();
            if better(err, mmax, n, best_err, best) {
                best = (mmax, n);
                best_err = err;
            }
        }
    }
    Ok(best)
}

/// Result of fitting one trapezoid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapezoidFit {
    pub model: Model,
    pub m: usize,
    pub n: usize,
    /// Top corners after slope rounding.
    pub a_star: f64,
    pub b_star: f64,
    pub mu_star: f64,
    pub h_star: f64,
    /// Hysterons whose thresholds crossed after rounding and were collapsed
    /// to a reversible ramp at the midpoint.
    pub merged: usize,
}

/// Fits `K = m n` ramp hysterons of equal weight and height to a trapezoid.
///
/// The side slope ratio `(A - alpha) / (B - beta)` is rounded to `m / n`; the
/// pinned side keeps its slope and the other top corner moves.
pub fn calibrate_trapezoid(t: &Trapezoid, kmax: usize, pin: Pin) -> Result<TrapezoidFit, CalibrationError> {
    let h = t.w_max - t.w_min;
    if t.a == t.alpha || t.b == t.beta {
        return Err(CalibrationError::DegenerateSlope);
    }
    let s_l = h / (t.a - t.alpha);
    let s_r = h / (t.b - t.beta);
    let (m, n) = rational_approx(s_r / s_l, kmax)?;
    let r_star = m as f64 / n as f64;
    let (s_l_star, a_star, b_star) = match pin {
        Pin::Left => (s_l, t.a, t.beta + h / (s_l * r_star)),
        Pin::Right => {
            let sl = s_r / r_star;
            (sl, t.alpha + h / sl, t.b)
        }
    };
    let mu_star = s_l_star * m as f64;
    let h_star = h / mu_star;
    let k = m * n;
    let mu_k = mu_star / k as f64;
    let mut hysterons = Vec::with_capacity(k);
    let mut merged = 0;
    for idx in 0..k {
        // idx = (j-1) n + (l-1) for alpha, idx = (l-1) m + (j-1) for beta
        let mut alpha = t.alpha + (idx / n) as f64 * h_star;
        let mut beta = t.beta + (idx / m) as f64 * h_star;
        if alpha > beta {
            merged += 1;
            alpha = 0.5 * (alpha + beta);
            beta = alpha;
        }
        hysterons.push(Hysteron::linear(mu_k, alpha, beta, Truncation::Ramp { h: h_star }));
    }
    let model = Model::new(ModelKind::KNonlinear, hysterons, t.w_min)?;
    Ok(TrapezoidFit { model, m, n, a_star, b_star, mu_star, h_star, merged })
}

/// Exact fit with a single curve-bounded hysteron.
pub fn calibrate_generalized(left: MonotoneCurve, right: MonotoneCurve) -> Model {
    Model::gamma(left, right)
}

/// Relay flavour produced by [`calibrate_preisach`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PreisachVariant {
    /// Heaviside relays.
    Raw,
    /// Ramps of height `eps h` and weight `1/eps`.
    Eps(f64),
    /// Erf relays.
    Smooth,
}

/// `K` relays of equal height spread uniformly over the output range. The
/// switching thresholds sit midway between consecutive curve preimages.
pub fn calibrate_preisach(
    g: &GeneralizedTrapezoid,
    k: usize,
    variant: PreisachVariant,
) -> Result<Model, CalibrationError> {
    if k == 0 {
        return Err(CalibrationError::InvalidInput("need at least one relay".into()));
    }
    let h = (g.w_max - g.w_min) / k as f64;
    let mut ul = Vec::with_capacity(k + 1);
    let mut ur = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let w = if i == k { g.w_max } else { g.w_min + i as f64 * h };
        ul.push(g.left.inverse_min(w)?);
        ur.push(g.right.inverse_max(w)?);
    }
    let (kind, mu) = match variant {
        PreisachVariant::Raw => (ModelKind::KPreisachRaw, 1.0),
        PreisachVariant::Eps(eps) => {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(CalibrationError::InvalidInput(format!("eps {eps} must be positive")));
            }
            (ModelKind::KPreisachEps, 1.0 / eps)
        }
        PreisachVariant::Smooth => (ModelKind::KPreisachSmooth, 1.0),
    };
    let trunc = match variant {
        PreisachVariant::Raw => Truncation::Heaviside { h },
        PreisachVariant::Eps(eps) => Truncation::Ramp { h: eps * h },
        PreisachVariant::Smooth => Truncation::SmoothErf { h },
    };
    let hysterons = (0..k)
        .map(|i| Hysteron::linear(mu, 0.5 * (ul[i] + ul[i + 1]), 0.5 * (ur[i] + ur[i + 1]), trunc))
        .collect();
    Ok(Model::new(kind, hysterons, g.w_min)?)
}

/// Untruncated plays reproducing the piecewise linear interpolant of `right`
/// through the nodes `u_1 < ... < u_{K+1}`. Needs nondecreasing secant
/// slopes.
pub fn calibrate_linear_play(right: &MonotoneCurve, nodes: &[f64]) -> Result<Model, CalibrationError> {
    if nodes.len() < 2 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CalibrationError::InvalidInput("nodes must be strictly increasing".into()));
    }
    let ws: Vec<f64> = nodes.iter().map(|&u| right.eval(u)).collect();
    let mut hysterons = Vec::with_capacity(nodes.len() - 1);
    let mut acc = 0.0;
    for k in 0..nodes.len() - 1 {
        let s = (ws[k + 1] - ws[k]) / (nodes[k + 1] - nodes[k]);
        let mu = s - acc;
        if mu < 0.0 {
            return Err(CalibrationError::NegativeWeight { index: k, mu });
        }
        acc = s;
        if mu > 0.0 {
            hysterons.push(Hysteron::linear(mu, nodes[0], nodes[k], Truncation::Identity));
        }
    }
    Ok(Model::new(ModelKind::KLinear, hysterons, ws[0])?)
}

/// How the output range is cut into slabs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartitionStrategy {
    /// Equal slab heights.
    Uniform,
    /// Start from one slab and bisect the slab whose curved sides deviate
    /// most from their secants, until the deviation is below `tol` or the
    /// slab count is reached.
    Adaptive { tol: f64 },
}

/// Levels `w_0 < ... < w_I` covering `[w_min, w_max]`.
pub fn partition_range(
    g: &GeneralizedTrapezoid,
    slabs: usize,
    strategy: PartitionStrategy,
) -> Result<Vec<f64>, CalibrationError> {
    if slabs == 0 {
        return Err(CalibrationError::InvalidInput("need at least one slab".into()));
    }
    match strategy {
        PartitionStrategy::Uniform => {
            let dw = (g.w_max - g.w_min) / slabs as f64;
            Ok((0..=slabs).map(|i| if i == slabs { g.w_max } else { g.w_min + i as f64 * dw }).collect())
        }
        PartitionStrategy::Adaptive { tol } => {
            let mut levels = vec![g.w_min, g.w_max];
            let mut devs = vec![slab_deviation(g, g.w_min, g.w_max)?];
            while levels.len() - 1 < slabs {
                let (i, &d) = devs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
                if d <= tol {
                    break;
                }
                let mid = 0.5 * (levels[i] + levels[i + 1]);
                let lo = slab_deviation(g, levels[i], mid)?;
                let hi = slab_deviation(g, mid, levels[i + 1])?;
                levels.insert(i + 1, mid);
                devs.splice(i..=i, [lo, hi]);
            }
            Ok(levels)
        }
    }
}

const SIDE_SAMPLES: usize = 64;

/// Largest horizontal gap between a curve and the chord from `(u0, w0)` to
/// `(u1, w1)`, sampled over the output levels.
fn chord_gap(inv: impl Fn(f64) -> Result<f64, CurveError>, u0: f64, u1: f64, w0: f64, w1: f64) -> Result<f64, CurveError> {
    let mut gap: f64 = 0.0;
    for i in 0..=SIDE_SAMPLES {
        let t = i as f64 / SIDE_SAMPLES as f64;
        let w = w0 + t * (w1 - w0);
        gap = gap.max((inv(w)? - (u0 + t * (u1 - u0))).abs());
    }
    Ok(gap)
}

/// Vertical deviation of both curved sides of a slab from their chords.
fn slab_deviation(g: &GeneralizedTrapezoid, w0: f64, w1: f64) -> Result<f64, CalibrationError> {
    let mut dev: f64 = 0.0;
    for (curve, use_max) in [(&g.left, false), (&g.right, true)] {
        let inv = |w: f64| if use_max { curve.inverse_max(w) } else { curve.inverse_min(w) };
        let (u0, u1) = (inv(w0)?, inv(w1)?);
        for i in 0..=SIDE_SAMPLES {
            let u = u0 + (u1 - u0) * i as f64 / SIDE_SAMPLES as f64;
            let chord = if u1 > u0 { w0 + (w1 - w0) * (u - u0) / (u1 - u0) } else { w1 };
            dev = dev.max((curve.eval(u).clamp(w0, w1) - chord).abs());
        }
    }
    Ok(dev)
}

/// Settings for [`calibrate_hierarchical`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchicalConfig {
    /// Budget for `m n` in each slab on the first pass; pass `q` allows
    /// `q` times as much.
    pub kmax_per_slab: usize,
    pub qmax: usize,
    /// Accept once the boundary error is at most this.
    pub tol: f64,
    /// Stop refining once the total hysteron count would exceed this.
    pub k_budget: usize,
    pub pin: Pin,
    /// Samples per branch when measuring the boundary error.
    pub boundary_samples: usize,
}

impl Default for HierarchicalConfig {
    fn default() -> Self {
        Self {
            kmax_per_slab: 16,
            qmax: 1,
            tol: f64::INFINITY,
            k_budget: usize::MAX,
            pin: Pin::Left,
            boundary_samples: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalFit {
    pub model: Model,
    pub levels: Vec<f64>,
    pub slabs: Vec<TrapezoidFit>,
    pub boundary_error: f64,
    pub iterations: usize,
}

impl HierarchicalFit {
    pub fn total_k(&self) -> usize {
        self.model.len()
    }
}

/// Stacks one trapezoid fit per slab. Slab `i + 1` starts at the rounded top
/// corners of slab `i`, so the boundary stays continuous. Each pass picks,
/// per slab, the top corners (from the curves or from earlier passes) whose
/// chords follow the curves best, then refits with a larger budget.
pub fn calibrate_hierarchical(
    g: &GeneralizedTrapezoid,
    levels: &[f64],
    cfg: &HierarchicalConfig,
) -> Result<HierarchicalFit, CalibrationError> {
    if levels.len() < 2 || levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CalibrationError::InvalidInput("levels must increase".into()));
    }
    if cfg.qmax == 0 || cfg.kmax_per_slab == 0 {
        return Err(CalibrationError::InvalidInput("qmax and kmax must be positive".into()));
    }
    let nslab = levels.len() - 1;
    let mut cand_a: Vec<Vec<f64>> = Vec::with_capacity(nslab);
    let mut cand_b: Vec<Vec<f64>> = Vec::with_capacity(nslab);
    for i in 0..nslab {
        cand_a.push(vec![g.left.inverse_min(levels[i + 1])?]);
        cand_b.push(vec![g.right.inverse_max(levels[i + 1])?]);
    }
    let v = g.vertices()?;
    let mut best: Option<HierarchicalFit> = None;
    for q in 1..=cfg.qmax {
        let kmax = cfg.kmax_per_slab * q;
        let (mut alpha, mut beta) = (v.alpha, v.beta);
        let mut slabs = Vec::with_capacity(nslab);
        for i in 0..nslab {
            let (w0, w1) = (levels[i], levels[i + 1]);
            let a = pick_corner(&cand_a[i], |w| g.left.inverse_min(w), alpha, w0, w1)?;
            let b = pick_corner(&cand_b[i], |w| g.right.inverse_max(w), beta, w0, w1)?;
            let t = Trapezoid::new(alpha, beta, a, b.max(a), w0, w1)?;
            let fit = calibrate_trapezoid(&t, kmax, cfg.pin)?;
            alpha = fit.a_star;
            beta = fit.b_star;
            slabs.push(fit);
        }
        for (i, s) in slabs.iter().enumerate() {
            cand_a[i].push(s.a_star);
            cand_b[i].push(s.b_star);
        }
        let hysterons: Vec<Hysteron> = slabs.iter().flat_map(|s| s.model.hysterons.iter().cloned()).collect();
        let model = Model::new(ModelKind::KNonlinear, hysterons, g.w_min)?;
        let boundary_error = boundary_error(&model, g, cfg.boundary_samples)?;
        let fit = HierarchicalFit { model, levels: levels.to_vec(), slabs, boundary_error, iterations: q };
        let over_budget = fit.total_k() > cfg.k_budget;
        if boundary_error <= cfg.tol && !over_budget {
            return Ok(fit);
        }
        let improves = best.as_ref().is_none_or(|b| fit.boundary_error < b.boundary_error);
        if improves && (!over_budget || best.is_none()) {
            best = Some(fit);
        }
        if over_budget {
            break;
        }
    }
    Err(CalibrationError::BudgetExceeded { best: Box::new(best.expect("at least one pass")) })
}

fn pick_corner(
    cands: &[f64],
    inv: impl Fn(f64) -> Result<f64, CurveError> + Copy,
    start: f64,
    w0: f64,
    w1: f64,
) -> Result<f64, CalibrationError> {
    let mut best = (f64::INFINITY, cands[0]);
    for &c in cands {
        if c <= start {
            continue;
        }
        let gap = chord_gap(inv, start, c, w0, w1)?;
        if gap < best.0 {
            best = (gap, c);
        }
    }
    if best.0.is_infinite() {
        return Err(CalibrationError::DegenerateSlope);
    }
    Ok(best.1)
}

/// Outer loop of a model: input swept from the left bottom corner up to the
/// right top corner and back, `samples` steps per branch.
pub fn boundary_sweep(
    model: &Model,
    g: &GeneralizedTrapezoid,
    samples: usize,
) -> Result<Vec<(f64, f64, bool)>, CalibrationError> {
    let v = g.vertices()?;
    let mut state = model.init_state(v.alpha, &InitMode::LeftCurve)?;
    let n = samples.max(1);
    let mut out = Vec::with_capacity(2 * n + 1);
    out.push((v.alpha, model.output(&state), true));
    for (from, to, up) in [(v.alpha, v.b, true), (v.b, v.alpha, false)] {
        for i in 1..=n {
            let u = if i == n { to } else { from + (to - from) * i as f64 / n as f64 };
            out.push((u, model.step(&mut state, u)?, up));
        }
    }
    Ok(out)
}

/// Largest vertical distance between the swept outer loop of `model` and the
/// boundary of `g`.
pub fn boundary_error(model: &Model, g: &GeneralizedTrapezoid, samples: usize) -> Result<f64, CalibrationError> {
    let mut err: f64 = 0.0;
    for (u, w, up) in boundary_sweep(model, g, samples)? {
        let curve = if up { &g.right } else { &g.left };
        let target = curve.eval(u).clamp(g.w_min, g.w_max);
        err = err.max((w - target).abs());
    }
    Ok(err)
}
