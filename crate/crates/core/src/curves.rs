//! Monotone primary curves.
//!
//! A [`MonotoneCurve`] is a continuous nondecreasing map `R -> R` with a
//! left-limit derivative and two generalized inverses. Outside its natural
//! domain every variant extends linearly, so evaluation never fails.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, LazyLock, RwLock};

use serde::{Deserialize, Serialize};

/// Errors raised while building or inverting a curve.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CurveError {
    #[error("value {w} lies outside the curve range [{lo}, {hi}]")]
    OutOfRange { w: f64, lo: f64, hi: f64 },
    #[error("curve data is not nondecreasing at sample {index}")]
    NotMonotone { index: usize },
    #[error("duplicate abscissa {u} with differing ordinates")]
    DuplicateAbscissa { u: f64 },
    #[error("a piecewise linear curve needs at least two distinct points")]
    TooFewPoints,
    #[error("non-finite curve data")]
    NonFinite,
    #[error("no closed-form curve registered under `{0}`")]
    UnknownClosedForm(String),
}

/// Piecewise linear curve through strictly increasing abscissae.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    /// Builds a curve from points already sorted by abscissa.
    pub fn new(points: &[(f64, f64)]) -> Result<Self, CurveError> {
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(CurveError::NonFinite);
        }
        if points.len() < 2 {
            return Err(CurveError::TooFewPoints);
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(if w[1].0 == w[0].0 {
                    CurveError::DuplicateAbscissa { u: w[0].0 }
                } else {
                    CurveError::NotMonotone { index: i + 1 }
                });
            }
            if w[1].1 < w[0].1 {
                return Err(CurveError::NotMonotone { index: i + 1 });
            }
        }
        Ok(Self {
            xs: points.iter().map(|p| p.0).collect(),
            ys: points.iter().map(|p| p.1).collect(),
        })
    }

    /// Builds a curve from unsorted samples. Exact duplicates collapse;
    /// a repeated abscissa with a different ordinate is rejected.
    pub fn from_samples(mut points: Vec<(f64, f64)>) -> Result<Self, CurveError> {
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(CurveError::NonFinite);
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(points.len());
        for p in points {
            match out.last() {
                Some(q) if q.0 == p.0 => {
                    if q.1 != p.1 {
                        return Err(CurveError::DuplicateAbscissa { u: p.0 });
                    }
                }
                _ => out.push(p),
            }
        }
        Self::new(&out)
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.xs.iter().copied().zip(self.ys.iter().copied()).collect()
    }

    fn seg_slope(&self, i: usize) -> f64 {
        (self.ys[i + 1] - self.ys[i]) / (self.xs[i + 1] - self.xs[i])
    }

    fn eval(&self, u: f64) -> f64 {
        let n = self.xs.len();
        if u <= self.xs[0] {
            return self.ys[0] + self.seg_slope(0) * (u - self.xs[0]);
        }
        if u >= self.xs[n - 1] {
            return self.ys[n - 1] + self.seg_slope(n - 2) * (u - self.xs[n - 1]);
        }
        // first index with xs[i] >= u; u is strictly inside the span
        let i = self.xs.partition_point(|&x| x < u);
        if self.xs[i] == u {
            return self.ys[i];
        }
        let (x0, x1, y0, y1) = (self.xs[i - 1], self.xs[i], self.ys[i - 1], self.ys[i]);
        y0 + (y1 - y0) * ((u - x0) / (x1 - x0))
    }

    fn slope_left(&self, u: f64) -> f64 {
        let n = self.xs.len();
        if u <= self.xs[0] {
            return self.seg_slope(0);
        }
        if u > self.xs[n - 1] {
            return self.seg_slope(n - 2);
        }
        let i = self.xs.partition_point(|&x| x < u);
        self.seg_slope(i - 1)
    }

    fn inverse(&self, w: f64, want_max: bool) -> Result<f64, CurveError> {
        let n = self.xs.len();
        let (lo, hi) = (self.ys[0], self.ys[n - 1]);
        if w < lo {
            let s = self.seg_slope(0);
            if s > 0.0 {
                return Ok(self.xs[0] + (w - lo) / s);
            }
            return Err(CurveError::OutOfRange { w, lo, hi });
        }
        if w > hi {
            let s = self.seg_slope(n - 2);
            if s > 0.0 {
                return Ok(self.xs[n - 1] + (w - hi) / s);
            }
            return Err(CurveError::OutOfRange { w, lo, hi });
        }
        if want_max {
            // last breakpoint with y <= w
            let i = self.ys.partition_point(|&y| y <= w) - 1;
            if self.ys[i] == w || i == n - 1 {
                return Ok(self.xs[i]);
            }
            let (x0, x1, y0, y1) = (self.xs[i], self.xs[i + 1], self.ys[i], self.ys[i + 1]);
            Ok(x0 + (x1 - x0) * ((w - y0) / (y1 - y0)))
        } else {
            // first breakpoint with y >= w
            let i = self.ys.partition_point(|&y| y < w);
            if self.ys[i] == w || i == 0 {
                return Ok(self.xs[i]);
            }
            let (x0, x1, y0, y1) = (self.xs[i - 1], self.xs[i], self.ys[i - 1], self.ys[i]);
            Ok(x0 + (x1 - x0) * ((w - y0) / (y1 - y0)))
        }
    }
}

impl TryFrom<Vec<(f64, f64)>> for PiecewiseLinear {
    type Error = CurveError;
    fn try_from(points: Vec<(f64, f64)>) -> Result<Self, CurveError> {
        Self::new(&points)
    }
}

impl From<PiecewiseLinear> for Vec<(f64, f64)> {
    fn from(c: PiecewiseLinear) -> Self {
        c.points()
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A curve given by a formula. Serialized by name; deserialization resolves
/// the name through the process-wide registry (see [`ClosedForm::register`]).
#[derive(Clone)]
pub struct ClosedForm {
    name: String,
    eval: RealFn,
    slope: RealFn,
}

impl ClosedForm {
    /// `eval` must be continuous and nondecreasing; `slope` returns the
    /// left-limit derivative.
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        slope: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), eval: Arc::new(eval), slope: Arc::new(slope) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Makes the curve resolvable by name, e.g. from a model file.
    pub fn register(self) {
        REGISTRY.write().expect("registry poisoned").insert(self.name.clone(), self);
    }

    pub fn lookup(name: &str) -> Result<Self, CurveError> {
        REGISTRY
            .read()
            .expect("registry poisoned")
            .get(name)
            .cloned()
            .ok_or_else(|| CurveError::UnknownClosedForm(name.to_string()))
    }
}

impl fmt::Debug for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("ClosedForm").field(&self.name).finish()
    }
}

impl PartialEq for ClosedForm {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl Serialize for ClosedForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.name)
    }
}

impl<'de> Deserialize<'de> for ClosedForm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        ClosedForm::lookup(&name).map_err(serde::de::Error::custom)
    }
}

static REGISTRY: LazyLock<RwLock<HashMap<String, ClosedForm>>> = LazyLock::new(|| {
    let mut m = HashMap::new();
    for cf in builtin_closed_forms() {
        m.insert(cf.name.clone(), cf);
    }
    RwLock::new(m)
});

const CC_TOP: f64 = 14.0 / 3.0;

fn cc_right(u: f64) -> f64 {
    if u <= 1.0 {
        (u - 1.0) / 3.0
    } else if u >= 3.0 {
        CC_TOP + 13.0 / 3.0 * (u - 3.0)
    } else {
        (u - 1.0) * (u - 1.0) + (u - 1.0) / 3.0
    }
}

fn cc_right_slope(u: f64) -> f64 {
    if u <= 1.0 {
        1.0 / 3.0
    } else if u > 3.0 {
        13.0 / 3.0
    } else {
        2.0 * (u - 1.0) + 1.0 / 3.0
    }
}

fn cc_left(u: f64) -> f64 {
    if (1.0..=3.0).contains(&u) {
        CC_TOP - cc_right(4.0 - u)
    } else {
        cc_right(u)
    }
}

fn cc_left_slope(u: f64) -> f64 {
    if u > 1.0 && u <= 3.0 {
        cc_right_slope(4.0 - u)
    } else {
        cc_right_slope(u)
    }
}

fn builtin_closed_forms() -> Vec<ClosedForm> {
    vec![
        ClosedForm::new("convex_right", cc_right, cc_right_slope),
        ClosedForm::new("concave_left", cc_left, cc_left_slope),
    ]
}

/// Continuous nondecreasing curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MonotoneCurve {
    /// `u`
    Identity,
    /// `u + c`
    Shift { c: f64 },
    PiecewiseLinear { points: PiecewiseLinear },
    /// `capacity * affinity * u / (1 + affinity * u)` for `u >= 0`, tangent
    /// line below zero.
    Langmuir { capacity: f64, affinity: f64 },
    /// Pointwise maximum of several curves.
    UpperEnvelope { parts: Vec<MonotoneCurve> },
    ClosedForm { name: ClosedForm },
}

impl MonotoneCurve {
    pub fn piecewise_linear(points: &[(f64, f64)]) -> Result<Self, CurveError> {
        Ok(Self::PiecewiseLinear { points: PiecewiseLinear::new(points)? })
    }

    pub fn langmuir(capacity: f64, affinity: f64) -> Self {
        Self::Langmuir { capacity, affinity }
    }

    pub fn closed_form(name: &str) -> Result<Self, CurveError> {
        Ok(Self::ClosedForm { name: ClosedForm::lookup(name)? })
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Self::Identity => u,
            Self::Shift { c } => u + c,
            Self::PiecewiseLinear { points } => points.eval(u),
            Self::Langmuir { capacity, affinity } => {
                if u <= 0.0 {
                    capacity * affinity * u
                } else {
                    capacity * (affinity * u / (1.0 + affinity * u))
                }
            }
            Self::UpperEnvelope { parts } => {
                parts.iter().map(|c| c.eval(u)).fold(f64::NEG_INFINITY, f64::max)
            }
            Self::ClosedForm { name } => (name.eval)(u),
        }
    }

    /// Left-limit derivative at `u`.
    pub fn slope(&self, u: f64) -> f64 {
        match self {
            Self::Identity | Self::Shift { .. } => 1.0,
            Self::PiecewiseLinear { points } => points.slope_left(u),
            Self::Langmuir { capacity, affinity } => {
                if u <= 0.0 {
                    capacity * affinity
                } else {
                    let d = 1.0 + affinity * u;
                    capacity * affinity / (d * d)
                }
            }
            Self::UpperEnvelope { parts } => {
                let top = self.eval(u);
                parts
                    .iter()
                    .filter(|c| c.eval(u) == top)
                    .map(|c| c.slope(u))
                    .fold(f64::INFINITY, f64::min)
            }
            Self::ClosedForm { name } => (name.slope)(u),
        }
    }

    /// Supremum of the curve values, if finite.
    pub fn sup(&self) -> f64 {
        match self {
            Self::Langmuir { capacity, .. } => *capacity,
            Self::UpperEnvelope { parts } => {
                parts.iter().map(|c| c.sup()).fold(f64::NEG_INFINITY, f64::max)
            }
            Self::PiecewiseLinear { points } => {
                if points.seg_slope(points.xs.len() - 2) > 0.0 {
                    f64::INFINITY
                } else {
                    *points.ys.last().unwrap()
                }
            }
            _ => f64::INFINITY,
        }
    }

    /// Smallest preimage of `w`.
    ///
    /// For piecewise linear curves the preimage is taken within the
    /// breakpoint span whenever `w` lies in its range.
    pub fn inverse_min(&self, w: f64) -> Result<f64, CurveError> {
        self.inverse(w, false)
    }

    /// Largest preimage of `w`.
    pub fn inverse_max(&self, w: f64) -> Result<f64, CurveError> {
        self.inverse(w, true)
    }

    fn inverse(&self, w: f64, want_max: bool) -> Result<f64, CurveError> {
        if !w.is_finite() {
            return Err(CurveError::NonFinite);
        }
        match self {
            Self::Identity => Ok(w),
            Self::Shift { c } => Ok(w - c),
            Self::PiecewiseLinear { points } => points.inverse(w, want_max),
            Self::Langmuir { capacity, affinity } => {
                if w <= 0.0 {
                    Ok(w / (capacity * affinity))
                } else if w < *capacity {
                    Ok(w / (affinity * (capacity - w)))
                } else {
                    Err(CurveError::OutOfRange { w, lo: f64::NEG_INFINITY, hi: *capacity })
                }
            }
            _ => self.inverse_bisect(w, want_max),
        }
    }

    fn inverse_bisect(&self, w: f64, want_max: bool) -> Result<f64, CurveError> {
        // min: smallest x with f(x) >= w, bracketed by f(lo) < w <= f(hi)
        // max: largest x with f(x) <= w, bracketed by f(lo) <= w < f(hi)
        let below = |x: f64| if want_max { self.eval(x) <= w } else { self.eval(x) < w };
        let out = || CurveError::OutOfRange { w, lo: f64::NEG_INFINITY, hi: self.sup() };
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        let mut step = 1.0;
        while !below(lo) {
            step *= 2.0;
            lo -= step;
            if lo < -1e300 {
                return Err(out());
            }
        }
        step = 1.0;
        while below(hi) {
            step *= 2.0;
            hi += step;
            if hi > 1e300 {
                return Err(out());
            }
        }
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if below(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(if want_max { lo } else { hi })
    }
}
