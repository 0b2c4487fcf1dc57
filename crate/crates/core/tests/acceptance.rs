//! Acceptance suite. Run with
//!
//! ```text
//! cargo test -p hysteresis --test acceptance -- --nocapture
//! ```
//!
//! Each criterion prints one `PASS` or `FAIL` line. The criteria run one
//! after another inside a single test so that their timings do not compete
//! for cores.

use std::time::{Duration, Instant};

use hysteresis::calibration::{
    boundary_sweep, calibrate_generalized, calibrate_trapezoid, rational_approx, GeneralizedTrapezoid, Pin, Trapezoid,
};
use hysteresis::model::scan;
use hysteresis::ode::{convergence_study, integrate as integrate_ode, OdeRun};
use hysteresis::pde::{integrate as integrate_pde, pde_convergence, Inflow, PdeProblem, Profile, RunOptions};
use hysteresis::play::{generalized_resolvent, linear_resolvent};
use hysteresis::presets::*;
use hysteresis::solver::{solve_step, SolverConfig, SolverMethod};
use hysteresis::{InitMode, Model, ModelKind, MonotoneCurve, Truncation};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

struct Report {
    failed: Vec<u32>,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, pass: bool, elapsed: Duration, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {id:>2} {name} ({:.2?}): {detail}", elapsed);
        if !pass {
            self.failed.push(id);
        }
    }
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

/// Outer loop of the intro example, written out branch by branch.
fn intro_reference(u: f64, increasing: bool) -> f64 {
    match (increasing, u) {
        (true, u) if u <= 4.0 => u,
        (true, _) => 4.0,
        (false, u) if u >= 2.0 => 4.0,
        (false, u) => 2.0 * u,
    }
}

fn criterion_1(r: &mut Report) {
    let t0 = Instant::now();
    let m = calibrate_generalized(cut_ramp(2.0), cut_ramp(1.0));
    let mut s = m.init_state(0.0, &InitMode::LeftCurve).unwrap();
    let tr = scan(&m, &mut s, &[0.0, 5.0, 0.0], 5000).unwrap();
    let err = tr
        .u
        .iter()
        .zip(&tr.w)
        .enumerate()
        .map(|(i, (&u, &w))| (w - intro_reference(u, i <= 5000)).abs())
        .fold(0.0, f64::max);
    let el = t0.elapsed();
    let pass = tr.len() == 10_001 && err <= 1e-12 && el < Duration::from_secs(1);
    r.line(1, "intro path", pass, el, format!("{} samples, max |w - w_ref| = {err:.1e}", tr.len()));
}

fn intro_run() -> (OdeRun, Duration) {
    let t0 = Instant::now();
    let run = integrate_ode(&intro_ode(1e-3), &SolverConfig::default()).unwrap();
    (run, t0.elapsed())
}

fn criterion_2(r: &mut Report, run: &OdeRun, el: Duration) {
    let tau = 1e-3;
    let (u9, w9, u18) = (run.u[9000], run.w[9000], run.u[18000]);
    let pass = (run.t[9000] - 9.0).abs() < 1e-9
        && (u9 - 5.0).abs() <= 2.0 * tau
        && (w9 - 4.0).abs() <= 2.0 * tau
        && u18.abs() <= 2.0 * tau
        && el < Duration::from_secs(5);
    r.line(2, "intro ODE", pass, el, format!("U(9) = {u9:.6}, W(9) = {w9:.6}, U(18) = {u18:.2e}"));
}

/// Per-step defect of `|a(U^n) - a(U^{n-1})| + sum mu |db| = tau |F^n|`
/// with `a = id`.
fn defects(run: &OdeRun) -> Vec<f64> {
    (1..run.u.len())
        .map(|n| ((run.u[n] - run.u[n - 1]).abs() + run.variation[n] - run.increments[n].abs()).abs())
        .collect()
}

fn criterion_3(r: &mut Report, intro: &OdeRun) {
    let t0 = Instant::now();
    let d_intro = defects(intro).into_iter().fold(0.0, f64::max);
    let model = convex_family(Family::Nonlinear, 0, 0.0).unwrap();
    let k = model.len();
    let run = integrate_ode(&convex_ode(model, true, 1e-3), &SolverConfig::default()).unwrap();
    let worst = defects(&run)
        .iter()
        .enumerate()
        .map(|(i, d)| d / run.tolerance[i + 1])
        .fold(0.0, f64::max);
    let pass = d_intro <= 1e-10 && worst <= 4.0;
    r.line(
        3,
        "balance identity",
        pass,
        t0.elapsed(),
        format!("intro defect {d_intro:.1e}; ramp stack K = {k}: worst defect / tolerance = {worst:.3}"),
    );
}

fn criterion_4(r: &mut Report) {
    let t0 = Instant::now();
    let lin = calibrate_trapezoid(&Trapezoid::new(3.0, 9.0, 4.0, 11.0, 0.0, 5.0).unwrap(), 100, Pin::Left).unwrap();
    let rows: Vec<[f64; 4]> = lin
        .model
        .hysterons
        .iter()
        .map(|h| match (&h.bounds, h.truncation) {
            (hysteresis::model::Bounds::Linear { alpha, beta }, Truncation::Ramp { h: ht }) => [h.mu, *alpha, *beta, ht],
            _ => [f64::NAN; 4],
        })
        .collect();
    let exact = rows == vec![[2.5, 3.0, 9.0, 1.0], [2.5, 3.0, 10.0, 1.0]];
    let curved = calibrate_trapezoid(&Trapezoid::new(3.0, 9.0, 4.1, 11.2, 0.0, 5.0).unwrap(), 100, Pin::Left).unwrap();
    let curved_ok = curved.model.len() == 2
        && curved.model.hysterons.iter().all(|h| {
            (h.mu - 25.0 / 11.0).abs() <= 1e-12 && h.truncation.height().is_some_and(|ht| (ht - 1.1).abs() <= 1e-12)
        });
    let ratio = rational_approx(0.5, 100).unwrap();
    let pass = exact && curved_ok && ratio == (1, 2);
    r.line(
        4,
        "calibration golden values",
        pass,
        t0.elapsed(),
        format!(
            "straight rows {rows:?}; curved mu = {:?}, h = {:?}; 0.5 -> {ratio:?}",
            curved.model.hysterons.iter().map(|h| h.mu).collect::<Vec<_>>(),
            curved.model.hysterons.iter().map(|h| h.truncation.height()).collect::<Vec<_>>()
        ),
    );
}

fn hausdorff(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let one_way = |p: &[(f64, f64)], q: &[(f64, f64)]| {
        p.iter()
            .map(|x| q.iter().map(|y| (x.0 - y.0).hypot(x.1 - y.1)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

fn criterion_5(r: &mut Report) {
    let t0 = Instant::now();
    let coarse = Model::from_rows(ModelKind::KNonlinear, &TWO_WAY_COARSE).unwrap();
    let fine = Model::from_rows(ModelKind::KNonlinear, &TWO_WAY_FINE).unwrap();
    let g = GeneralizedTrapezoid::new(
        MonotoneCurve::piecewise_linear(&[(4.0, 0.0), (8.0, 1.0)]).unwrap(),
        MonotoneCurve::piecewise_linear(&[(8.0, 0.0), (10.0, 1.0)]).unwrap(),
        0.0,
        1.0,
    )
    .unwrap();
    let sweep = |m: &Model| -> Vec<(f64, f64)> {
        boundary_sweep(m, &g, 1000).unwrap().into_iter().map(|(u, w, _)| (u, w)).collect()
    };
    let d = hausdorff(&sweep(&coarse), &sweep(&fine));
    let probe = |m: &Model| {
        let mut s = m.init_state(TWO_WAY_PROBE[0], &InitMode::LeftCurve).unwrap();
        scan(m, &mut s, &TWO_WAY_PROBE, 200).unwrap().w
    };
    let gap = probe(&coarse).iter().zip(probe(&fine)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let pass = d <= 1e-10 && gap >= 0.01;
    r.line(5, "same boundary, different operator", pass, t0.elapsed(), format!("Hausdorff {d:.1e}, probe gap {gap:.4}"));
}

fn criterion_6(r: &mut Report) {
    let t0 = Instant::now();
    let p = convex_ode(convex_family(Family::Gamma, 0, 0.0).unwrap(), false, 0.1);
    let rep = convergence_study(&p, &[0.1, 0.01, 0.001], 1e-4, &SolverConfig::default()).unwrap();
    let target = [0.0670, 0.00689, 0.000692];
    let el = t0.elapsed();
    let pass = rep.e_u.iter().zip(target).all(|(&e, t)| within(e, t, 0.3))
        && (0.9..=1.1).contains(&rep.p_u)
        && el < Duration::from_secs(120);
    r.line(6, "ODE convergence", pass, el, format!("E_u = {:.4?}, p = {:.3} (E_w = {:.4?})", rep.e_u, rep.p_u, rep.e_w));
}

fn criterion_7(r: &mut Report) {
    let g = methane();
    let p = methane_box(gamma_model(&g), 0.01);
    let target = [19.34, 10.01, 2.67];
    let hs = [0.01, 0.005, 0.001];
    let t0 = Instant::now();
    let rep = pde_convergence(&p, &hs, 1e-4, &SolverConfig::default()).unwrap();
    let el = t0.elapsed();
    let pass = rep.e_u.iter().zip(target).all(|(&e, t)| within(e, t, 0.3))
        && (0.8..=1.0).contains(&rep.p_u)
        && el < Duration::from_secs(300);
    r.line(
        7,
        "PDE convergence, reference h = 1e-4",
        pass,
        el,
        format!("E_u = {:.3?}, p = {:.3} (E_w = {:.3?})", rep.e_u, rep.p_u, rep.e_w),
    );
    let t1 = Instant::now();
    let near = pde_convergence(&p, &hs, 5e-4, &SolverConfig::default()).unwrap();
    let near_pass = near.e_u.iter().zip(target).all(|(&e, t)| within(e, t, 0.3)) && (0.8..=1.0).contains(&near.p_u);
    println!(
        "[NOTE]  7 same sweep against h = 5e-4 ({:.2?}): E_u = {:.3?}, p = {:.3}, {} the band; the nearby reference \
         removes about half of the h = 0.001 error",
        t1.elapsed(),
        near.e_u,
        near.p_u,
        if near_pass { "inside" } else { "outside" }
    );
}

/// Position where `u` crosses `c`, scanning from the right.
fn last_crossing(x: &[f64], u: &[f64], c: f64) -> Option<f64> {
    (1..u.len()).rev().find_map(|j| {
        let (a, b) = (u[j - 1] - c, u[j] - c);
        (a != b && a * b <= 0.0).then(|| x[j - 1] + (x[j] - x[j - 1]) * a / (a - b))
    })
}

/// Position where `u` crosses `c`, scanning from the left.
fn first_crossing(x: &[f64], u: &[f64], c: f64) -> Option<f64> {
    (1..u.len()).find_map(|j| {
        let (a, b) = (u[j - 1] - c, u[j] - c);
        (a != b && a * b <= 0.0).then(|| x[j - 1] + (x[j] - x[j - 1]) * a / (a - b))
    })
}

fn criterion_8(r: &mut Report) {
    let t0 = Instant::now();
    let h = 0.005;
    let opts = RunOptions { snapshots: vec![4.0, 5.0, 6.0, 7.0, 8.0, 9.0], ..Default::default() };
    let run = integrate_pde(&intro_ibvp(h), &opts, &SolverConfig::default()).unwrap();
    // level c of the rising inflow enters at t = c
    let c = 0.5;
    let mut front_ok = true;
    let mut speeds = Vec::new();
    for s in &run.snapshots {
        let x = last_crossing(&run.x, &s.u, c).unwrap_or(f64::NAN);
        let speed = x / (s.t - c);
        front_ok &= (speed - 0.5).abs() <= 3.0 * h / s.t;
        speeds.push(speed);
    }
    // level c of the falling inflow enters at t = 10 - c
    let s9 = run.snapshots.last().unwrap();
    let fan: Vec<f64> = [1.25, 1.5, 1.75]
        .iter()
        .map(|&c| first_crossing(&run.x, &s9.u, c).unwrap_or(f64::NAN) / (9.0 - (10.0 - c)))
        .collect();
    let fan_ok = fan.iter().all(|v| (v - 1.0 / 3.0).abs() <= 0.05);
    let s5 = &run.snapshots[1];
    let jump = s5.u.windows(2).map(|w| (w[0] - w[1]).abs()).fold(0.0, f64::max);
    let pass = front_ok && fan_ok;
    r.line(
        8,
        "intro PDE fronts",
        pass,
        t0.elapsed(),
        format!("plateau speeds {speeds:.4?}; fan speeds {fan:.4?}; largest cell jump in u(., 5) = {jump:.3}"),
    );
}

fn criterion_9(r: &mut Report) {
    let t0 = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for fam in [Family::Gamma, Family::Nonlinear, Family::Linear, Family::PreisachEps, Family::PreisachSmooth] {
        let k = if fam == Family::Linear { 50 } else { 100 };
        let m = convex_family(fam, k, 0.1).unwrap();
        let run = integrate_ode(&convex_ode(m, true, 0.01), &SolverConfig::default());
        ok &= run.as_ref().is_ok_and(|r| r.u.len() == 1001);
        lines.push(format!("{} {:.2}", fam.label(), run.map(|r| r.mean_iterations()).unwrap_or(f64::NAN)));
    }
    let newton = SolverConfig::with_method(SolverMethod::Newton);
    let gamma = convex_family(Family::Gamma, 0, 0.0).unwrap();
    let mut gamma_means = Vec::new();
    for disc in [false, true] {
        match integrate_ode(&convex_ode(gamma.clone(), disc, 0.01), &newton) {
            Ok(run) => gamma_means.push(run.mean_iterations()),
            Err(_) => gamma_means.push(f64::INFINITY),
        }
    }
    ok &= gamma_means.iter().all(|&m| m <= 5.0);
    let eps = convex_family(Family::PreisachEps, 100, 0.1).unwrap();
    let pure = integrate_ode(&convex_ode(eps.clone(), true, 0.01), &newton);
    let fallback = integrate_ode(&convex_ode(eps, true, 0.01), &SolverConfig::default()).map(|r| r.fallbacks).unwrap_or(0);
    let newton_trouble = pure.is_err() || fallback > 0;
    ok &= newton_trouble;
    r.line(
        9,
        "solver robustness",
        ok,
        t0.elapsed(),
        format!(
            "fallback mean iterations [{}]; Newton on gamma {gamma_means:.2?}; Newton on steep relays: {}, {fallback} fallbacks",
            lines.join(", "),
            match pure {
                Ok(_) => "completed".to_string(),
                Err(e) => format!("error ({e})"),
            }
        ),
    );
}

fn row() -> impl Strategy<Value = [f64; 4]> {
    (0.1f64..3.0, -3.0f64..3.0, 0.0f64..3.0, 0.1f64..2.0).prop_map(|(mu, a, w, h)| [mu, a, a + w, h])
}

fn ramp_model() -> impl Strategy<Value = Model> {
    prop::collection::vec(row(), 1..6).prop_map(|rows| Model::from_rows(ModelKind::KNonlinear, &rows).unwrap())
}

fn storage() -> impl Strategy<Value = MonotoneCurve> {
    prop_oneof![
        Just(MonotoneCurve::Identity),
        (0.2f64..3.0, 0.2f64..3.0)
            .prop_map(|(s1, s2)| MonotoneCurve::piecewise_linear(&[(0.0, 0.0), (1.0, s1), (2.0, s1 + s2)]).unwrap()),
    ]
}

fn outputs(m: &Model, v: &[f64]) -> Vec<f64> {
    m.hysterons.iter().zip(v).map(|(h, &x)| h.mu * h.truncation.eval(x)).collect()
}

fn resolve_all(m: &Model, g: &[f64], u: f64) -> Vec<f64> {
    m.hysterons.iter().zip(g).map(|(h, &x)| h.resolve(x, u).unwrap()).collect()
}

fn run_property<S: Strategy>(name: &str, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn criterion_10(r: &mut Report) {
    let t0 = Instant::now();
    let cfg = SolverConfig::default();
    let mut failures = Vec::new();
    let mut record = |res: Result<(), String>| {
        if let Err(e) = res {
            failures.push(e);
        }
    };
    record(run_property(
        "resolvent nonexpansive",
        (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0, -2.0f64..2.0, 0.0f64..3.0),
        |(g1, g2, u1, u2, a, w)| {
            let d = (linear_resolvent(g1, u1, a, a + w).unwrap() - linear_resolvent(g2, u2, a, a + w).unwrap()).abs();
            prop_assert!(d <= (g1 - g2).abs().max((u1 - u2).abs()) + 1e-15);
            let (gl, gr) = (cut_ramp(2.0), cut_ramp(1.0));
            let d = (generalized_resolvent(g1, u1, &gl, &gr).unwrap() - generalized_resolvent(g2, u1, &gl, &gr).unwrap()).abs();
            prop_assert!(d <= (g1 - g2).abs() + 1e-15);
            Ok(())
        },
    ));
    record(run_property(
        "order preservation",
        (ramp_model(), storage(), prop::collection::vec(-4.0f64..6.0, 12), -5.0f64..5.0, 0.0f64..2.0, -3.0f64..3.0),
        |(m, a, g, f, df, u0)| {
            let k = m.len();
            let g1 = &g[..k];
            let g2: Vec<f64> = g1.iter().zip(&g[6..6 + k]).map(|(x, y)| x + y.abs() / 3.0).collect();
            let rhs = |g: &[f64], f: f64| f + outputs(&m, g).iter().sum::<f64>();
            let s1 = hysteresis::ModelState { v: g1.to_vec() };
            let s2 = hysteresis::ModelState { v: g2.clone() };
            let u1 = solve_step(&a, &m, &s1, u0, rhs(g1, f), &cfg).unwrap().u;
            let u2 = solve_step(&a, &m, &s2, u0, rhs(&g2, f + df), &cfg).unwrap().u;
            prop_assert!(u1 <= u2 + 1e-9, "{} > {}", u1, u2);
            let (v1, v2) = (resolve_all(&m, g1, u1), resolve_all(&m, &g2, u2));
            prop_assert!(v1.iter().zip(&v2).all(|(x, y)| x <= &(y + 1e-9)));
            let (gl, gr) = (cut_ramp(2.0), cut_ramp(1.0));
            prop_assert!(
                generalized_resolvent(g1[0], u1, &gl, &gr).unwrap() <= generalized_resolvent(g2[0], u2.max(u1), &gl, &gr).unwrap()
            );
            Ok(())
        },
    ));
    record(run_property(
        "L1 contraction",
        (ramp_model(), storage(), prop::collection::vec(-4.0f64..6.0, 12), -5.0f64..5.0, -5.0f64..5.0, -3.0f64..3.0),
        |(m, a, g, f1, f2, u0)| {
            let k = m.len();
            let (g1, g2) = (&g[..k], &g[6..6 + k]);
            let b1 = outputs(&m, g1);
            let b2 = outputs(&m, g2);
            let rhs1 = f1 + b1.iter().sum::<f64>();
            let rhs2 = f2 + b2.iter().sum::<f64>();
            let s1 = hysteresis::ModelState { v: g1.to_vec() };
            let s2 = hysteresis::ModelState { v: g2.to_vec() };
            let u1 = solve_step(&a, &m, &s1, u0, rhs1, &cfg).unwrap().u;
            let u2 = solve_step(&a, &m, &s2, u0, rhs2, &cfg).unwrap().u;
            let o1 = outputs(&m, &resolve_all(&m, g1, u1));
            let o2 = outputs(&m, &resolve_all(&m, g2, u2));
            let lhs = (a.eval(u1) - a.eval(u2)).abs() + o1.iter().zip(&o2).map(|(x, y)| (x - y).abs()).sum::<f64>();
            let bound = (f1 - f2).abs() + b1.iter().zip(&b2).map(|(x, y)| (x - y).abs()).sum::<f64>();
            let tol = cfg.tolerance(rhs1.abs().max(rhs2.abs()));
            prop_assert!(lhs <= bound + 8.0 * tol, "{} > {}", lhs, bound);
            Ok(())
        },
    ));
    record(run_property(
        "rate independence",
        (ramp_model(), prop::collection::vec(-5.0f64..8.0, 2..8), 2usize..40),
        |(m, peaks, n)| {
            let mut s1 = m.init_state(peaks[0], &InitMode::LeftCurve).unwrap();
            let mut s2 = s1.clone();
            let coarse = scan(&m, &mut s1, &peaks, 1).unwrap();
            let fine = scan(&m, &mut s2, &peaks, n).unwrap();
            for (i, w) in coarse.w.iter().enumerate() {
                prop_assert_eq!(*w, fine.w[i * n]);
            }
            Ok(())
        },
    ));
    record(run_property(
        "admissibility",
        (ramp_model(), prop::collection::vec(-5.0f64..8.0, 1..30)),
        |(m, path)| {
            let mut s = m.init_state(path[0], &InitMode::RightCurve).unwrap();
            for &u in &path {
                m.step(&mut s, u).unwrap();
                for (h, &v) in m.hysterons.iter().zip(&s.v) {
                    prop_assert!(h.bounds.lower(u) <= v && v <= h.bounds.upper(u));
                }
            }
            Ok(())
        },
    ));
    record(run_property(
        "PDE conservation",
        (prop::collection::vec(0.0f64..5.0, 3), 0.0f64..5.0, 0.3f64..1.0),
        |(vals, peak, lambda)| {
            let p = PdeProblem {
                a: MonotoneCurve::Identity,
                flux: MonotoneCurve::Identity,
                model: intro_model(),
                x_min: 0.0,
                x_max: 3.0,
                h: 0.1,
                u_init: Profile::Steps { breaks: vec![1.0, 2.0], values: vals },
                init: InitMode::LeftCurve,
                inflow: Inflow::dirichlet(move |t| peak * t / 3.0),
                t_final: 3.0,
                lambda,
            };
            let run = integrate_pde(&p, &RunOptions::default(), &cfg).unwrap();
            let (defect, slack) = run.conservation_defect();
            prop_assert!(defect <= slack, "{} > {}", defect, slack);
            Ok(())
        },
    ));
    let pass = failures.is_empty();
    r.line(
        10,
        "property suites",
        pass,
        t0.elapsed(),
        if pass { "6 properties x 1000 cases, 0 violations".into() } else { failures.join("; ") },
    );
}

#[test]
fn acceptance() {
    let mut r = Report { failed: Vec::new() };
    criterion_1(&mut r);
    let (intro, el) = intro_run();
    criterion_2(&mut r, &intro, el);
    criterion_3(&mut r, &intro);
    criterion_4(&mut r);
    criterion_5(&mut r);
    criterion_6(&mut r);
    criterion_7(&mut r);
    criterion_8(&mut r);
    criterion_9(&mut r);
    criterion_10(&mut r);
    assert!(r.failed.is_empty(), "failed criteria: {:?}", r.failed);
}
