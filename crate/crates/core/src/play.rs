//! Constraint resolvents and output truncations.
//!
//! The resolvent of the constraint `a <= v <= b` is the projection
//! `clamp(a, b, s) = min(max(a, s), b)`. One step of a play operator is this
//! projection applied to the previous internal state.

use serde::{Deserialize, Serialize};

use crate::curves::MonotoneCurve;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlayError {
    #[error("constraint bounds out of order: lower {lower} > upper {upper}")]
    ConstraintOrderViolation { lower: f64, upper: f64 },
    #[error("non-finite input")]
    NonFinite,
}

/// Projection of `s` onto `[a, b]`.
pub fn clamp(a: f64, b: f64, s: f64) -> Result<f64, PlayError> {
    if a.is_nan() || b.is_nan() || s.is_nan() {
        return Err(PlayError::NonFinite);
    }
    if a > b {
        return Err(PlayError::ConstraintOrderViolation { lower: a, upper: b });
    }
    Ok(s.max(a).min(b))
}

/// `clamp(gr(u), gl(u), vbar)`.
pub fn generalized_resolvent(
    vbar: f64,
    u: f64,
    gl: &MonotoneCurve,
    gr: &MonotoneCurve,
) -> Result<f64, PlayError> {
    clamp(gr.eval(u), gl.eval(u), vbar)
}

/// `clamp(u - beta, u - alpha, vbar)`.
pub fn linear_resolvent(vbar: f64, u: f64, alpha: f64, beta: f64) -> Result<f64, PlayError> {
    clamp(u - beta, u - alpha, vbar)
}

/// Output map applied to the internal play state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Truncation {
    /// No truncation.
    Identity,
    /// `x+ - (x - h)+`
    Ramp { h: f64 },
    /// `(h / eps) (x+ - (x - eps)+)`
    ScaledRamp { h: f64, eps: f64 },
    /// `h` for `x > 0`, else `0`. Discontinuous, so only usable open loop.
    Heaviside { h: f64 },
    /// `(h / 2) (erf(2x/h - 1) + 1)`
    SmoothErf { h: f64 },
}

impl Truncation {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Identity => x,
            Self::Ramp { h } => x.clamp(0.0, h),
            Self::ScaledRamp { h, eps } => h * (x.clamp(0.0, eps) / eps),
            Self::Heaviside { h } => {
                if x > 0.0 {
                    h
                } else {
                    0.0
                }
            }
            Self::SmoothErf { h } => 0.5 * h * (libm::erf(2.0 * x / h - 1.0) + 1.0),
        }
    }

    /// Left-limit derivative. The Heaviside jump contributes nothing.
    pub fn slope(&self, x: f64) -> f64 {
        match *self {
            Self::Identity => 1.0,
            Self::Ramp { h } => {
                if x > 0.0 && x <= h {
                    1.0
                } else {
                    0.0
                }
            }
            Self::ScaledRamp { h, eps } => {
                if x > 0.0 && x <= eps {
                    h / eps
                } else {
                    0.0
                }
            }
            Self::Heaviside { .. } => 0.0,
            Self::SmoothErf { h } => {
                let z = 2.0 * x / h - 1.0;
                std::f64::consts::FRAC_2_SQRT_PI * (-z * z).exp()
            }
        }
    }

    /// Height of the output range, `None` when unbounded.
    pub fn height(&self) -> Option<f64> {
        match *self {
            Self::Identity => None,
            Self::Ramp { h } | Self::ScaledRamp { h, .. } | Self::Heaviside { h } | Self::SmoothErf { h } => {
                Some(h)
            }
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, Self::Heaviside { .. })
    }

    pub(crate) fn validate(&self) -> bool {
        match *self {
            Self::Identity => true,
            Self::Ramp { h } | Self::Heaviside { h } | Self::SmoothErf { h } => h.is_finite() && h > 0.0,
            Self::ScaledRamp { h, eps } => h.is_finite() && h > 0.0 && eps.is_finite() && eps > 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp(1.0, 3.0, 5.0), Ok(3.0));
        assert_eq!(clamp(1.0, 3.0, -2.0), Ok(1.0));
        assert_eq!(clamp(1.0, 3.0, 2.0), Ok(2.0));
        assert_eq!(clamp(2.0, 2.0, 7.0), Ok(2.0));
        assert!(matches!(clamp(3.0, 1.0, 0.0), Err(PlayError::ConstraintOrderViolation { .. })));
    }

    #[test]
    fn resolvents() {
        assert_eq!(linear_resolvent(0.0, 5.0, 1.0, 3.0), Ok(2.0));
        let gl = MonotoneCurve::Shift { c: -1.0 };
        let gr = MonotoneCurve::Shift { c: -3.0 };
        assert_eq!(generalized_resolvent(0.0, 5.0, &gl, &gr), Ok(2.0));
        assert_eq!(generalized_resolvent(0.0, 2.0, &gl, &gr), Ok(0.0));
        assert!(generalized_resolvent(0.0, 2.0, &gr, &gl).is_err());
    }

    #[test]
    fn truncations() {
        assert_eq!(Truncation::Ramp { h: 1.0 }.eval(0.5), 0.5);
        assert_eq!(Truncation::Ramp { h: 1.0 }.eval(2.0), 1.0);
        assert_eq!(Truncation::Heaviside { h: 1.0 }.eval(0.0), 0.0);
        assert_eq!(Truncation::Heaviside { h: 1.0 }.eval(1e-300), 1.0);
        let e = Truncation::SmoothErf { h: 1.0 };
        assert!((e.eval(0.5) - 0.5).abs() < 1e-15);
        assert!(e.eval(-10.0) < 1e-12 && (e.eval(10.0) - 1.0).abs() < 1e-12);
        let s = Truncation::ScaledRamp { h: 2.0, eps: 0.5 };
        assert_eq!(s.eval(0.25), 1.0);
        assert_eq!(s.eval(3.0), 2.0);
        assert_eq!(s.slope(0.1), 4.0);
    }

    #[test]
    fn ramp_left_limit_slope() {
        let r = Truncation::Ramp { h: 1.0 };
        assert_eq!(r.slope(0.0), 0.0);
        assert_eq!(r.slope(1.0), 1.0);
        assert_eq!(r.slope(1.5), 0.0);
    }

    proptest! {
        #[test]
        fn clamp_is_idempotent(a in -1e3..1e3f64, d in 0.0..1e3f64, s in -1e4..1e4f64) {
            let b = a + d;
            let once = clamp(a, b, s).unwrap();
            prop_assert_eq!(clamp(a, b, once).unwrap(), once);
            prop_assert!(a <= once && once <= b);
        }

        #[test]
        fn clamp_is_nonexpansive(a in -1e3..1e3f64, d in 0.0..1e3f64, s in -1e4..1e4f64, t in -1e4..1e4f64) {
            let b = a + d;
            let cs = clamp(a, b, s).unwrap();
            let ct = clamp(a, b, t).unwrap();
            prop_assert!((cs - ct).abs() <= (s - t).abs());
        }

        #[test]
        fn linear_resolvent_monotone_in_u(vbar in -50.0..50.0f64, alpha in -10.0..10.0f64,
                                          width in 0.0..10.0f64, u1 in -30.0..30.0f64, du in 0.0..10.0f64) {
            let beta = alpha + width;
            let v1 = linear_resolvent(vbar, u1, alpha, beta).unwrap();
            let v2 = linear_resolvent(vbar, u1 + du, alpha, beta).unwrap();
            prop_assert!(v2 >= v1);
        }

        #[test]
        fn generalized_resolvent_contracts(vbar1 in -20.0..20.0f64, vbar2 in -20.0..20.0f64, u in 0.0..300.0f64) {
            let gl = MonotoneCurve::Langmuir { capacity: 543.0, affinity: 0.0382 };
            let gr = MonotoneCurve::Langmuir { capacity: 543.0, affinity: 0.001 };
            let a = generalized_resolvent(vbar1, u, &gl, &gr).unwrap();
            let b = generalized_resolvent(vbar2, u, &gl, &gr).unwrap();
            prop_assert!((a - b).abs() <= (vbar1 - vbar2).abs());
        }

        #[test]
        fn bounded_truncations_stay_in_range(x in -100.0..100.0f64, h in 0.01..10.0f64, eps in 0.01..1.0f64) {
            for t in [Truncation::Ramp { h }, Truncation::ScaledRamp { h, eps },
                      Truncation::Heaviside { h }, Truncation::SmoothErf { h }] {
                let y = t.eval(x);
                prop_assert!((0.0..=h).contains(&y));
                prop_assert!(t.eval(x + 0.5) >= y);
            }
        }
    }
}
