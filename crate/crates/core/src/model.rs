//! Discrete K-generalized play operators.
//!
//! A [`Model`] is a weighted sum of hysterons. Each hysteron carries an
//! internal state `v_k`, constrained by `gr_k(u) <= v_k <= gl_k(u)`, and
//! contributes `mu_k * b_k(v_k)` to the output
//!
//! ```text
//! w = offset + sum_k mu_k b_k(v_k).
//! ```
//!
//! One time step projects the previous states onto the new constraint band.

use serde::{Deserialize, Serialize};

use crate::curves::MonotoneCurve;
use crate::play::{clamp, PlayError, Truncation};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Play(#[from] PlayError),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("state has {got} entries, model has {expected} hysterons")]
    StateLength { expected: usize, got: usize },
    #[error("initial state of hysteron {index} is {v}, outside [{lower}, {upper}]")]
    Inadmissible { index: usize, v: f64, lower: f64, upper: f64 },
    #[error("operation needs linear constraint bounds")]
    NotLinear,
}

/// Constraint band of one hysteron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Bounds {
    /// `u - beta <= v <= u - alpha`
    Linear { alpha: f64, beta: f64 },
    /// `right(u) <= v <= left(u)`
    Curves { left: MonotoneCurve, right: MonotoneCurve },
}

impl Bounds {
    #[inline]
    pub fn lower(&self, u: f64) -> f64 {
        match self {
            Bounds::Linear { beta, .. } => u - beta,
            Bounds::Curves { right, .. } => right.eval(u),
        }
    }

    #[inline]
    pub fn upper(&self, u: f64) -> f64 {
        match self {
            Bounds::Linear { alpha, .. } => u - alpha,
            Bounds::Curves { left, .. } => left.eval(u),
        }
    }

    #[inline]
    fn lower_slope(&self, u: f64) -> f64 {
        match self {
            Bounds::Linear { .. } => 1.0,
            Bounds::Curves { right, .. } => right.slope(u),
        }
    }

    #[inline]
    fn upper_slope(&self, u: f64) -> f64 {
        match self {
            Bounds::Linear { .. } => 1.0,
            Bounds::Curves { left, .. } => left.slope(u),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hysteron {
    pub mu: f64,
    pub bounds: Bounds,
    pub truncation: Truncation,
}

impl Hysteron {
    pub fn linear(mu: f64, alpha: f64, beta: f64, truncation: Truncation) -> Self {
        Self { mu, bounds: Bounds::Linear { alpha, beta }, truncation }
    }

    /// Projects `vbar` onto the band at `u`.
    #[inline]
    pub fn resolve(&self, vbar: f64, u: f64) -> Result<f64, PlayError> {
        clamp(self.bounds.lower(u), self.bounds.upper(u), vbar)
    }

    /// Left-limit derivative of the projected state with respect to `u`.
    #[inline]
    fn resolve_slope(&self, vbar: f64, u: f64) -> f64 {
        if vbar >= self.bounds.upper(u) {
            self.bounds.upper_slope(u)
        } else if vbar < self.bounds.lower(u) {
            self.bounds.lower_slope(u)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// One hysteron bounded by two curves, no truncation.
    Gamma,
    /// Linear bands with ramp truncations.
    KNonlinear,
    /// Linear bands, no truncation.
    KLinear,
    /// Linear bands with Heaviside truncations (relays).
    KPreisachRaw,
    /// Linear bands with steep ramps of height `eps * h_k` and weight `1/eps`.
    KPreisachEps,
    /// Linear bands with erf truncations.
    KPreisachSmooth,
}

impl ModelKind {
    fn truncation_for(self, h: f64) -> Truncation {
        match self {
            ModelKind::Gamma | ModelKind::KLinear => Truncation::Identity,
            ModelKind::KNonlinear | ModelKind::KPreisachEps => {
                if h.is_infinite() {
                    Truncation::Identity
                } else {
                    Truncation::Ramp { h }
                }
            }
            ModelKind::KPreisachRaw => Truncation::Heaviside { h },
            ModelKind::KPreisachSmooth => Truncation::SmoothErf { h },
        }
    }
}

/// How to choose the initial internal state.
#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// `v_k = gl_k(u0)`, the upper end of the band.
    LeftCurve,
    /// `v_k = gr_k(u0)`, the lower end of the band.
    RightCurve,
    Explicit(Vec<f64>),
}

/// Internal states `v_1..v_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub kind: ModelKind,
    #[serde(default)]
    pub offset: f64,
    pub hysterons: Vec<Hysteron>,
}

impl Model {
    pub fn new(kind: ModelKind, hysterons: Vec<Hysteron>, offset: f64) -> Result<Self, ModelError> {
        let m = Self { kind, offset, hysterons };
        m.validate()?;
        Ok(m)
    }

    /// Single hysteron between two curves: `w = v`, `gr(u) <= v <= gl(u)`.
    pub fn gamma(left: MonotoneCurve, right: MonotoneCurve) -> Self {
        Self {
            kind: ModelKind::Gamma,
            offset: 0.0,
            hysterons: vec![Hysteron {
                mu: 1.0,
                bounds: Bounds::Curves { left, right },
                truncation: Truncation::Identity,
            }],
        }
    }

    /// Builds a model from rows `[mu, alpha, beta, h]`. The kind decides how
    /// `h` is read (ramp height, relay height, erf height; ignored when linear).
    ///
    /// ```
    /// use hysteresis::model::{Model, ModelKind};
    /// let m = Model::from_rows(ModelKind::KNonlinear, &[[2.5, 3.0, 9.0, 1.0], [2.5, 3.0, 10.0, 1.0]]).unwrap();
    /// assert_eq!(m.len(), 2);
    /// ```
    pub fn from_rows(kind: ModelKind, rows: &[[f64; 4]]) -> Result<Self, ModelError> {
        let hysterons = rows
            .iter()
            .map(|r| Hysteron::linear(r[0], r[1], r[2], kind.truncation_for(r[3])))
            .collect();
        Self::new(kind, hysterons, 0.0)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |s: String| Err(ModelError::Invalid(s));
        if self.hysterons.is_empty() {
            return bad("no hysterons".into());
        }
        if !self.offset.is_finite() {
            return bad("non-finite offset".into());
        }
        if self.kind == ModelKind::Gamma && self.hysterons.len() != 1 {
            return bad("a curve-bounded model has exactly one hysteron".into());
        }
        for (k, h) in self.hysterons.iter().enumerate() {
            if !(h.mu.is_finite() && h.mu > 0.0) {
                return bad(format!("hysteron {k}: weight {} must be positive", h.mu));
            }
            if !h.truncation.validate() {
                return bad(format!("hysteron {k}: invalid truncation {:?}", h.truncation));
            }
            match &h.bounds {
                Bounds::Linear { alpha, beta } => {
                    if !(alpha.is_finite() && beta.is_finite()) || alpha > beta {
                        return bad(format!("hysteron {k}: need alpha <= beta, got {alpha} > {beta}"));
                    }
                    if self.kind == ModelKind::Gamma {
                        return bad("curve-bounded model with linear bounds".into());
                    }
                }
                Bounds::Curves { .. } => {
                    if self.kind != ModelKind::Gamma {
                        return bad(format!("hysteron {k}: curve bounds need the Gamma kind"));
                    }
                }
            }
            let ok = match self.kind {
                ModelKind::Gamma | ModelKind::KLinear => matches!(h.truncation, Truncation::Identity),
                ModelKind::KNonlinear => {
                    matches!(h.truncation, Truncation::Ramp { .. } | Truncation::Identity)
                }
                ModelKind::KPreisachRaw => matches!(h.truncation, Truncation::Heaviside { .. }),
                ModelKind::KPreisachEps => {
                    matches!(h.truncation, Truncation::Ramp { .. } | Truncation::ScaledRamp { .. })
                }
                ModelKind::KPreisachSmooth => matches!(h.truncation, Truncation::SmoothErf { .. }),
            };
            if !ok {
                return bad(format!("hysteron {k}: truncation {:?} does not fit {:?}", h.truncation, self.kind));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.hysterons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hysterons.is_empty()
    }

    /// True when every output map is continuous (needed by implicit solvers).
    pub fn is_continuous(&self) -> bool {
        self.hysterons.iter().all(|h| h.truncation.is_continuous())
    }

    pub fn init_state(&self, u0: f64, mode: &InitMode) -> Result<ModelState, ModelError> {
        if !u0.is_finite() {
            return Err(PlayError::NonFinite.into());
        }
        let v = match mode {
            InitMode::LeftCurve => self.hysterons.iter().map(|h| h.bounds.upper(u0)).collect(),
            InitMode::RightCurve => self.hysterons.iter().map(|h| h.bounds.lower(u0)).collect(),
            InitMode::Explicit(v) => {
                if v.len() != self.len() {
                    return Err(ModelError::StateLength { expected: self.len(), got: v.len() });
                }
                v.clone()
            }
        };
        for (k, (h, &vk)) in self.hysterons.iter().zip(&v).enumerate() {
            let (lower, upper) = (h.bounds.lower(u0), h.bounds.upper(u0));
            if lower > upper {
                return Err(PlayError::ConstraintOrderViolation { lower, upper }.into());
            }
            if !(lower <= vk && vk <= upper) {
                return Err(ModelError::Inadmissible { index: k, v: vk, lower, upper });
            }
        }
        Ok(ModelState { v })
    }

    fn check_state(&self, state: &ModelState) -> Result<(), ModelError> {
        if state.v.len() != self.len() {
            return Err(ModelError::StateLength { expected: self.len(), got: state.v.len() });
        }
        Ok(())
    }

    /// Output of a state: `offset + sum mu_k b_k(v_k)`.
    pub fn output(&self, state: &ModelState) -> f64 {
        self.offset
            + self.hysterons.iter().zip(&state.v).map(|(h, &v)| h.mu * h.truncation.eval(v)).sum::<f64>()
    }

    /// Output after a trial step to `u`, without committing.
    pub fn evaluate_output(&self, state: &ModelState, u: f64) -> Result<f64, ModelError> {
        self.check_state(state)?;
        let mut w = self.offset;
        for (h, &vbar) in self.hysterons.iter().zip(&state.v) {
            w += h.mu * h.truncation.eval(h.resolve(vbar, u)?);
        }
        Ok(w)
    }

    /// Trial step to `u`: the output and the would-be new states.
    pub fn evaluate(&self, state: &ModelState, u: f64) -> Result<(f64, Vec<f64>), ModelError> {
        self.check_state(state)?;
        let mut w = self.offset;
        let mut v_new = Vec::with_capacity(self.len());
        for (h, &vbar) in self.hysterons.iter().zip(&state.v) {
            let v = h.resolve(vbar, u)?;
            w += h.mu * h.truncation.eval(v);
            v_new.push(v);
        }
        Ok((w, v_new))
    }

    /// Left-limit derivative of the trial output with respect to `u`.
    pub fn evaluate_slope(&self, state: &ModelState, u: f64) -> Result<f64, ModelError> {
        Ok(self.evaluate_with_slope(state, u)?.1)
    }

    /// Trial output together with its left-limit slope.
    pub fn evaluate_with_slope(&self, state: &ModelState, u: f64) -> Result<(f64, f64), ModelError> {
        self.check_state(state)?;
        let (mut w, mut dw) = (self.offset, 0.0);
        for (h, &vbar) in self.hysterons.iter().zip(&state.v) {
            let v = h.resolve(vbar, u)?;
            w += h.mu * h.truncation.eval(v);
            let dv = h.resolve_slope(vbar, u);
            if dv != 0.0 {
                dw += h.mu * h.truncation.slope(v) * dv;
            }
        }
        Ok((w, dw))
    }

    /// Commits a step to `u` and returns the new output.
    pub fn step(&self, state: &mut ModelState, u: f64) -> Result<f64, ModelError> {
        self.check_state(state)?;
        let mut w = self.offset;
        for (h, v) in self.hysterons.iter().zip(state.v.iter_mut()) {
            *v = h.resolve(*v, u)?;
            w += h.mu * h.truncation.eval(*v);
        }
        Ok(w)
    }

    /// Threshold pairs and weights `(alpha, beta, mu)` of a linear-band model.
    pub fn preisach_signature(&self) -> Result<Vec<(f64, f64, f64)>, ModelError> {
        self.hysterons
            .iter()
            .map(|h| match h.bounds {
                Bounds::Linear { alpha, beta } => Ok((alpha, beta, h.mu)),
                Bounds::Curves { .. } => Err(ModelError::NotLinear),
            })
            .collect()
    }
}

/// Sampled response of a model along a piecewise linear input path.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<Vec<f64>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.u.iter().copied().zip(self.w.iter().copied()).collect()
    }
}

/// Drives the model through the peak sequence `peaks`, which starts at the
/// state's current input. Each segment is split into `samples_per_segment`
/// equal steps; the first trace entry is the initial point.
///
/// Because the operators are rate independent, the values at the peaks do
/// not depend on `samples_per_segment`.
pub fn scan(
    model: &Model,
    state: &mut ModelState,
    peaks: &[f64],
    samples_per_segment: usize,
) -> Result<Trace, ModelError> {
    if peaks.iter().any(|u| !u.is_finite()) {
        return Err(PlayError::NonFinite.into());
    }
    let n = samples_per_segment.max(1);
    let mut tr = Trace::default();
    let Some(&u0) = peaks.first() else {
        return Ok(tr);
    };
    let w0 = model.step(state, u0)?;
    tr.u.push(u0);
    tr.w.push(w0);
    tr.v.push(state.v.clone());
    for seg in peaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        for i in 1..=n {
            let u = if i == n { b } else { a + (b - a) * (i as f64 / n as f64) };
            let w = model.step(state, u)?;
            tr.u.push(u);
            tr.w.push(w);
            tr.v.push(state.v.clone());
        }
    }
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b4() -> MonotoneCurve {
        MonotoneCurve::piecewise_linear(&[(-1.0, 0.0), (0.0, 0.0), (4.0, 4.0), (5.0, 4.0)]).unwrap()
    }

    fn intro() -> Model {
        let right = b4();
        let left = MonotoneCurve::piecewise_linear(&[(-1.0, 0.0), (0.0, 0.0), (2.0, 4.0), (3.0, 4.0)]).unwrap();
        Model::gamma(left, right)
    }

    #[test]
    fn intro_sweep() {
        let m = intro();
        let mut s = m.init_state(0.0, &InitMode::LeftCurve).unwrap();
        let tr = scan(&m, &mut s, &[0.0, 5.0, 0.0], 10).unwrap();
        let expected = |u: f64, up: bool| if up { u.min(4.0) } else { (2.0 * u).min(4.0) };
        for (i, (&u, &w)) in tr.u.iter().zip(&tr.w).enumerate() {
            assert!((w - expected(u, i <= 10)).abs() < 1e-14, "{u} {w}");
        }
    }

    #[test]
    fn unit_hysteron() {
        let m = Model::from_rows(ModelKind::KNonlinear, &[[1.0, 1.0, 3.0, 1.0]]).unwrap();
        let mut s = m.init_state(0.0, &InitMode::LeftCurve).unwrap();
        assert_eq!(s.v, vec![-1.0]);
        assert_eq!(m.step(&mut s, 5.0).unwrap(), 1.0);
        assert_eq!(m.step(&mut s, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn relay_switches_at_thresholds() {
        let m = Model::from_rows(ModelKind::KPreisachRaw, &[[1.0, 1.0, 3.0, 1.0]]).unwrap();
        let mut s = m.init_state(0.0, &InitMode::LeftCurve).unwrap();
        assert_eq!(m.step(&mut s, 3.0).unwrap(), 0.0);
        assert_eq!(m.step(&mut s, 3.0 + 1e-9).unwrap(), 1.0);
        assert_eq!(m.step(&mut s, 1.0 + 1e-9).unwrap(), 1.0);
        assert_eq!(m.step(&mut s, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn slopes() {
        let m = Model::from_rows(ModelKind::KNonlinear, &[[1.0, 1.0, 3.0, 1.0]]).unwrap();
        let s = ModelState { v: vec![-1.0] };
        assert_eq!(m.evaluate_slope(&s, 2.5).unwrap(), 0.0);
        assert_eq!(m.evaluate_slope(&s, 3.5).unwrap(), 1.0);
        let g = intro();
        let s = g.init_state(0.0, &InitMode::LeftCurve).unwrap();
        assert_eq!(g.evaluate_slope(&s, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn evaluate_does_not_commit() {
        let m = Model::from_rows(ModelKind::KNonlinear, &[[1.0, 1.0, 3.0, 1.0]]).unwrap();
        let s = m.init_state(0.0, &InitMode::LeftCurve).unwrap();
        let (w, v) = m.evaluate(&s, 5.0).unwrap();
        assert_eq!((w, v), (1.0, vec![2.0]));
        assert_eq!(s.v, vec![-1.0]);
    }

    #[test]
    fn rejects_bad_models_and_states() {
        assert!(Model::from_rows(ModelKind::KNonlinear, &[[1.0, 3.0, 1.0, 1.0]]).is_err());
        assert!(Model::from_rows(ModelKind::KNonlinear, &[[-1.0, 1.0, 3.0, 1.0]]).is_err());
        let m = Model::from_rows(ModelKind::KLinear, &[[1.0, 1.0, 3.0, 1.0]]).unwrap();
        assert!(m.init_state(0.0, &InitMode::Explicit(vec![-1.0])).is_ok());
        assert!(matches!(
            m.init_state(0.0, &InitMode::Explicit(vec![0.0])),
            Err(ModelError::Inadmissible { .. })
        ));
        assert!(matches!(m.init_state(0.0, &InitMode::Explicit(vec![])), Err(ModelError::StateLength { .. })));
        let crossed = Model::gamma(MonotoneCurve::Shift { c: -3.0 }, MonotoneCurve::Identity);
        let s = ModelState { v: vec![0.0] };
        assert!(matches!(
            crossed.step(&mut s.clone(), 1.0),
            Err(ModelError::Play(PlayError::ConstraintOrderViolation { .. }))
        ));
    }

    fn rows_strategy() -> impl Strategy<Value = Vec<[f64; 4]>> {
        prop::collection::vec((0.1..3.0f64, 0.0..5.0f64, 0.0..5.0f64, 0.1..3.0f64), 1..6)
            .prop_map(|v| v.into_iter().map(|(mu, a, d, h)| [mu, a, a + d, h]).collect())
    }

    proptest! {
        #[test]
        fn step_is_idempotent(rows in rows_strategy(), path in prop::collection::vec(-3.0..12.0f64, 1..8)) {
            let m = Model::from_rows(ModelKind::KNonlinear, &rows).unwrap();
            let mut s = m.init_state(0.0, &InitMode::LeftCurve).unwrap();
            for &u in &path {
                let w1 = m.step(&mut s, u).unwrap();
                let before = s.clone();
                let w2 = m.step(&mut s, u).unwrap();
                prop_assert_eq!(w1, w2);
                prop_assert_eq!(&before, &s);
            }
        }

        #[test]
        fn peaks_are_rate_independent(rows in rows_strategy(), path in prop::collection::vec(-3.0..12.0f64, 2..8)) {
            let m = Model::from_rows(ModelKind::KNonlinear, &rows).unwrap();
            let mut coarse = m.init_state(path[0], &InitMode::LeftCurve).unwrap();
            let mut fine = coarse.clone();
            let tc = scan(&m, &mut coarse, &path, 1).unwrap();
            let tf = scan(&m, &mut fine, &path, 37).unwrap();
            for (i, &w) in tc.w.iter().enumerate() {
                prop_assert_eq!(w, tf.w[i * 37]);
            }
            prop_assert_eq!(coarse, fine);
        }

        #[test]
        fn output_monotone_along_monotone_input(rows in rows_strategy(), a in -3.0..12.0f64, b in -3.0..12.0f64) {
            let m = Model::from_rows(ModelKind::KNonlinear, &rows).unwrap();
            let mut s = m.init_state(a, &InitMode::LeftCurve).unwrap();
            let tr = scan(&m, &mut s, &[a, b], 50).unwrap();
            for w in tr.w.windows(2) {
                prop_assert!((w[1] - w[0]) * (b - a) >= -1e-12);
            }
        }

        #[test]
        fn slope_matches_left_difference(rows in rows_strategy(), u0 in 0.0..8.0f64, u in 0.0..8.0f64) {
            let m = Model::from_rows(ModelKind::KNonlinear, &rows).unwrap();
            let mut s = m.init_state(0.0, &InitMode::LeftCurve).unwrap();
            m.step(&mut s, u0).unwrap();
            let d = 1e-7;
            let fd = (m.evaluate_output(&s, u).unwrap() - m.evaluate_output(&s, u - d).unwrap()) / d;
            let sl = m.evaluate_slope(&s, u).unwrap();
            // away from kinks the one-sided difference matches the slope
            let fd2 = (m.evaluate_output(&s, u - d).unwrap() - m.evaluate_output(&s, u - 2.0 * d).unwrap()) / d;
            if (fd - fd2).abs() < 1e-6 {
                prop_assert!((fd - sl).abs() < 1e-5, "fd {} slope {}", fd, sl);
            }
        }
    }
}
