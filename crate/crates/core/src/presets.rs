//! Worked problems used by the guide, the command line tool and the tests.

use crate::calibration::{
    calibrate_hierarchical, calibrate_linear_play, calibrate_preisach, partition_range, CalibrationError,
    GeneralizedTrapezoid, HierarchicalConfig, HierarchicalFit, PartitionStrategy, PreisachVariant,
};
use crate::curves::MonotoneCurve;
use crate::model::{InitMode, Model, ModelError, ModelKind};
use crate::play::Truncation;
use crate::ode::{OdeProblem, Source};
use crate::pde::{Inflow, PdeProblem, Profile};

/// `b(s) = s+ - (s - 4)+`, evaluated at `scale * u`.
pub fn cut_ramp(scale: f64) -> MonotoneCurve {
    MonotoneCurve::piecewise_linear(&[(-1.0, 0.0), (0.0, 0.0), (4.0 / scale, 4.0), (4.0 / scale + 1.0, 4.0)])
        .expect("valid breakpoints")
}

/// Curve-bounded model with `gr(u) = b(u)` and `gl(u) = b(2u)`.
pub fn intro_model() -> Model {
    Model::gamma(cut_ramp(2.0), cut_ramp(1.0))
}

/// Exact outer loop of [`intro_model`] for the sweep `0 -> 5 -> 0`.
pub fn intro_loop(u: f64, increasing: bool) -> f64 {
    if increasing {
        u.clamp(0.0, 4.0)
    } else {
        (2.0 * u).clamp(0.0, 4.0)
    }
}

/// `d/dt (u + w) = f` with `f = 1` up to `t = 9`, then `-1`, on `[0, 18]`.
pub fn intro_ode(tau: f64) -> OdeProblem {
    OdeProblem {
        a: MonotoneCurve::Identity,
        model: intro_model(),
        source: Source::PiecewiseConstant { breaks: vec![9.0], values: vec![1.0, -1.0] },
        u_init: 0.0,
        init: InitMode::LeftCurve,
        t_final: 18.0,
        tau,
    }
}

/// Inflow profile `t` up to `t = 5`, then `10 - t`.
pub fn intro_inflow(t: f64) -> f64 {
    if t <= 5.0 {
        t
    } else {
        10.0 - t
    }
}

/// Transport of the intro model on `[0, 6]` with inflow [`intro_inflow`],
/// `tau = h`.
pub fn intro_ibvp(h: f64) -> PdeProblem {
    PdeProblem {
        a: MonotoneCurve::Identity,
        flux: MonotoneCurve::Identity,
        model: intro_model(),
        x_min: 0.0,
        x_max: 6.0,
        h,
        u_init: Profile::Constant(0.0),
        init: InitMode::LeftCurve,
        inflow: Inflow::dirichlet(intro_inflow),
        t_final: 9.0,
        lambda: 1.0,
    }
}

pub const CONVEX_TOP: f64 = 14.0 / 3.0;

/// Convex right curve `(u-1)^2 + (u-1)/3` and its point reflection on
/// `[1, 3]`.
pub fn convex_concave() -> GeneralizedTrapezoid {
    GeneralizedTrapezoid::new(
        MonotoneCurve::closed_form("concave_left").expect("builtin"),
        MonotoneCurve::closed_form("convex_right").expect("builtin"),
        0.0,
        CONVEX_TOP,
    )
    .expect("valid graph")
}

/// Methane isotherm pair: desorption `V = 543, B = 0.0382`, adsorption
/// `V = 811, B = 0.00237`.
pub fn methane() -> GeneralizedTrapezoid {
    GeneralizedTrapezoid::langmuir_pair(543.0, 0.0382, 811.0, 0.00237).expect("valid isotherms")
}

pub fn gamma_model(g: &GeneralizedTrapezoid) -> Model {
    Model::gamma(g.left.clone(), g.right.clone())
}

/// Box profile `350 | 700 | 0 | 250` on the quarters of `[0, 1]`.
pub const METHANE_BOX: [f64; 4] = [350.0, 700.0, 0.0, 250.0];

/// Methane transport from [`METHANE_BOX`] to `t = 0.5` with `tau = 0.9 h`.
/// Cells start on the adsorption branch and the inflow copies the first node.
pub fn methane_box(model: Model, h: f64) -> PdeProblem {
    PdeProblem {
        a: MonotoneCurve::Identity,
        flux: MonotoneCurve::Identity,
        model,
        x_min: 0.0,
        x_max: 1.0,
        h,
        u_init: Profile::Steps { breaks: vec![0.25, 0.5, 0.75], values: METHANE_BOX.to_vec() },
        init: InitMode::RightCurve,
        inflow: Inflow::ZeroGradient,
        t_final: 0.5,
        lambda: 0.9,
    }
}

/// Piecewise linear hump: zero outside `[0.1, 0.7]`, peak 700 at `x = 0.4`.
pub const METHANE_HUMP: [(f64, f64); 5] = [(0.0, 0.0), (0.1, 0.0), (0.4, 700.0), (0.7, 0.0), (1.0, 0.0)];

/// Methane transport from [`METHANE_HUMP`], otherwise as [`methane_box`].
pub fn methane_hump(model: Model, h: f64) -> PdeProblem {
    PdeProblem { u_init: Profile::Points(METHANE_HUMP.to_vec()), ..methane_box(model, h) }
}

/// Model families fitted to the convex-concave graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// No hysteresis: both curves replaced by the right one.
    NoHysteresis,
    Gamma,
    /// Hierarchical ramp stack.
    Nonlinear,
    /// Untruncated plays.
    Linear,
    /// Ramp regularized relays.
    PreisachEps,
    /// Erf relays.
    PreisachSmooth,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::NoHysteresis,
        Family::Gamma,
        Family::Nonlinear,
        Family::Linear,
        Family::PreisachEps,
        Family::PreisachSmooth,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Family::NoHysteresis => "none",
            Family::Gamma => "gamma",
            Family::Nonlinear => "nonlinear",
            Family::Linear => "linear",
            Family::PreisachEps => "preisach-eps",
            Family::PreisachSmooth => "preisach-smooth",
        }
    }
}

/// Slab count and per-slab budget for the convex-concave ramp stack.
pub const CONVEX_SLABS: usize = 10;
pub const CONVEX_KMAX: usize = 24;
/// Per-slab budget for the large convex-concave stack (K = 973).
pub const CONVEX_LARGE_KMAX: usize = 176;

/// Ramp stack for the convex-concave graph (about a hundred hysterons).
pub fn convex_nonlinear() -> Result<HierarchicalFit, CalibrationError> {
    convex_nonlinear_with(CONVEX_KMAX)
}

/// Ramp stack for the convex-concave graph with a per-slab budget `kmax`.
pub fn convex_nonlinear_with(kmax: usize) -> Result<HierarchicalFit, CalibrationError> {
    let g = convex_concave();
    let levels = partition_range(&g, CONVEX_SLABS, PartitionStrategy::Adaptive { tol: 0.0 })?;
    calibrate_hierarchical(&g, &levels, &HierarchicalConfig { kmax_per_slab: kmax, ..Default::default() })
}

/// Replaces every ramp of a ramp stack by an erf of the same height.
pub fn smoothed(model: &Model) -> Result<Model, ModelError> {
    let hysterons = model
        .hysterons
        .iter()
        .map(|h| {
            let mut h = h.clone();
            if let Truncation::Ramp { h: height } = h.truncation {
                h.truncation = Truncation::SmoothErf { h: height };
            }
            h
        })
        .collect();
    Model::new(ModelKind::KPreisachSmooth, hysterons, model.offset)
}

pub const METHANE_SLABS: usize = 7;
/// Per-slab budgets for uniform and adaptive methane partitions.
pub const METHANE_UNIFORM_KMAX: usize = 9;
pub const METHANE_ADAPTIVE_KMAX: usize = 96;

/// Ramp stack for the methane graph over seven slabs.
pub fn methane_nonlinear(adaptive: bool) -> Result<HierarchicalFit, CalibrationError> {
    let g = methane();
    let (strategy, kmax) = if adaptive {
        (PartitionStrategy::Adaptive { tol: 0.0 }, METHANE_ADAPTIVE_KMAX)
    } else {
        (PartitionStrategy::Uniform, METHANE_UNIFORM_KMAX)
    };
    let levels = partition_range(&g, METHANE_SLABS, strategy)?;
    calibrate_hierarchical(&g, &levels, &HierarchicalConfig { kmax_per_slab: kmax, ..Default::default() })
}

/// Member of a family fitted to the convex-concave graph. `k` is the
/// hysteron count for the linear and relay families.
pub fn convex_family(family: Family, k: usize, eps: f64) -> Result<Model, CalibrationError> {
    let g = convex_concave();
    match family {
        Family::NoHysteresis => Ok(Model::gamma(g.right.clone(), g.right.clone())),
        Family::Gamma => Ok(gamma_model(&g)),
        Family::Nonlinear => Ok(convex_nonlinear()?.model),
        Family::Linear => {
            let nodes: Vec<f64> = (0..=k).map(|i| 1.0 + 2.0 * i as f64 / k as f64).collect();
            calibrate_linear_play(&g.right, &nodes)
        }
        Family::PreisachEps => calibrate_preisach(&g, k, PreisachVariant::Eps(eps)),
        Family::PreisachSmooth => calibrate_preisach(&g, k, PreisachVariant::Smooth),
    }
}

/// `d/dt (u + w) = f` on `[0, 10]` from `u = 1` with the damped sine or its
/// sign.
pub fn convex_ode(model: Model, discontinuous: bool, tau: f64) -> OdeProblem {
    let t_final = 10.0;
    OdeProblem {
        a: MonotoneCurve::Identity,
        model,
        source: if discontinuous { Source::damped_sine_sign(t_final) } else { Source::damped_sine() },
        u_init: 1.0,
        init: InitMode::LeftCurve,
        t_final,
        tau,
    }
}

/// Ramp stack of three hysterons with monotone thresholds.
pub const STACK_MONOTONE: [[f64; 4]; 3] = [[1.0, 1.0, 5.0, 1.0], [1.0, 3.0, 9.0, 1.0], [1.0, 7.0, 11.0, 1.0]];

/// Same thresholds, reordered so that the loops nest.
pub const STACK_NESTED: [[f64; 4]; 3] = [[1.0, 3.0, 5.0, 1.0], [1.0, 7.0, 9.0, 1.0], [1.0, 1.0, 11.0, 1.0]];

/// Input with many nested reversals.
pub const RICH_INPUT: [f64; 32] = [
    0.0, 14.0, 0.0, 6.0, 3.0, 5.5, 3.0, 10.0, 7.0, 9.5, 7.0, 11.5, 3.0, 6.0, 3.0, 5.5, 3.0, 10.0, 7.0, 9.5, 7.0,
    12.0, 7.0, 10.0, 7.5, 10.0, 3.5, 6.0, 3.0, 6.0, 1.0, 3.0,
];

/// Two-hysteron stacks illustrating how trapezoids combine, all driven by
/// `0 -> 6 -> 0`.
pub const STACKINGS: [(&str, [[f64; 4]; 2]); 6] = [
    ("disjoint", [[1.0, 1.0, 3.0, 1.0], [1.0, 3.0, 5.0, 1.0]]),
    ("adjacent", [[1.0, 1.0, 3.0, 1.0], [1.0, 2.0, 4.0, 1.0]]),
    ("scaled", [[1.0, 1.0, 3.0, 1.0], [2.0, 2.0, 4.0, 0.5]]),
    ("narrow-scaled", [[1.0, 1.0, 3.0, 1.0], [2.0, 2.0, 3.0, 0.5]]),
    ("shared-right", [[1.0, 1.0, 3.0, 1.0], [1.0, 2.0, 3.0, 1.0]]),
    ("equal-thresholds", [[1.0, 1.0, 2.0, 1.0], [1.0, 2.0, 2.0, 1.0]]),
];

/// One trapezoid `(4,0), (8,0), (10,1), (8,1)` as two ramps of height 2.
pub const TWO_WAY_COARSE: [[f64; 4]; 2] = [[0.25, 4.0, 8.0, 2.0], [0.25, 6.0, 8.0, 2.0]];

/// The same trapezoid as eight ramps of height one half.
pub const TWO_WAY_FINE: [[f64; 4]; 8] = [
    [0.25, 4.0, 8.0, 0.5],
    [0.25, 4.5, 8.0, 0.5],
    [0.25, 5.0, 8.5, 0.5],
    [0.25, 5.5, 8.5, 0.5],
    [0.25, 6.0, 9.0, 0.5],
    [0.25, 6.5, 9.0, 0.5],
    [0.25, 7.0, 9.5, 0.5],
    [0.25, 7.5, 9.5, 0.5],
];

/// Input that stays inside the trapezoid after the first peak.
pub const TWO_WAY_PROBE: [f64; 4] = [4.0, 8.5, 6.0, 8.5];

/// Input used to draw methane scanning curves.
pub const METHANE_INPUT: [f64; 8] = [0.0, 800.0, 0.0, 650.0, 100.0, 350.0, 500.0, 200.0];

/// Input used to draw convex-concave scanning curves.
pub const CONVEX_INPUT: [f64; 8] = [1.0, 3.0, 1.0, 2.8, 1.5, 2.5, 1.6, 2.2];

/// Unit hysterons with `alpha = 1`, `beta = 3` under different truncations.
pub fn unit_hysterons() -> Vec<(&'static str, Model, Vec<f64>, InitMode)> {
    let row = |kind, mu, h| Model::from_rows(kind, &[[mu, 1.0, 3.0, h]]).expect("valid row");
    vec![
        ("ramp", row(ModelKind::KNonlinear, 1.0, 1.0), vec![0.0, 5.0, 0.0], InitMode::LeftCurve),
        (
            "linear",
            row(ModelKind::KLinear, 1.0, f64::INFINITY),
            vec![0.0, 5.0, 0.0, 4.0, 1.0, 3.0],
            InitMode::Explicit(vec![-1.0]),
        ),
        ("relay", row(ModelKind::KPreisachRaw, 1.0, 1.0), vec![0.0, 5.0, 0.0], InitMode::LeftCurve),
        ("steep-ramp", row(ModelKind::KPreisachEps, 100.0, 0.01), vec![0.0, 5.0, 0.0], InitMode::LeftCurve),
        (
            "erf",
            row(ModelKind::KPreisachSmooth, 1.0, 1.0),
            vec![0.0, 5.0, 0.0, 0.0, 3.5, 1.25],
            InitMode::LeftCurve,
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::scan;

    #[test]
    fn intro_model_loop() {
        let m = intro_model();
        let mut s = m.init_state(0.0, &InitMode::LeftCurve).unwrap();
        let tr = scan(&m, &mut s, &[0.0, 5.0, 0.0], 50).unwrap();
        for (i, (&u, &w)) in tr.u.iter().zip(&tr.w).enumerate() {
            assert_eq!(w, intro_loop(u, i <= 50));
        }
    }

    #[test]
    fn unit_hysterons_start_admissible() {
        for (name, m, path, init) in unit_hysterons() {
            assert!(m.init_state(path[0], &init).is_ok(), "{name}");
        }
    }

    #[test]
    fn two_way_trapezoid() {
        let coarse = Model::from_rows(ModelKind::KNonlinear, &TWO_WAY_COARSE).unwrap();
        let fine = Model::from_rows(ModelKind::KNonlinear, &TWO_WAY_FINE).unwrap();
        let run = |m: &Model| {
            let mut s = m.init_state(4.0, &InitMode::LeftCurve).unwrap();
            scan(m, &mut s, &TWO_WAY_PROBE[..3], 1).unwrap().w
        };
        assert_eq!(run(&coarse), vec![0.0, 0.25, 0.125]);
        assert_eq!(run(&fine), vec![0.0, 0.25, 0.25]);
    }

    #[test]
    fn families_build() {
        for f in Family::ALL {
            let m = convex_family(f, 50, 0.1).unwrap();
            assert!(!m.is_empty(), "{}", f.label());
        }
    }
}
