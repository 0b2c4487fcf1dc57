use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use hysteresis::calibration::{
    boundary_error, calibrate_generalized, calibrate_hierarchical, calibrate_linear_play, calibrate_preisach,
    calibrate_trapezoid, partition_range, GeneralizedTrapezoid, HierarchicalConfig, PartitionStrategy, Pin,
    PreisachVariant, Trapezoid,
};
use hysteresis::io::{model_from_toml, model_to_toml, read_points, write_table};
use hysteresis::ode::{convergence_study, integrate as integrate_ode, OdeProblem, Source};
use hysteresis::pde::{integrate as integrate_pde, pde_convergence as pde_study, Inflow, PdeProblem, Profile, RunOptions};
use hysteresis::presets::{
    convex_concave, intro_inflow, methane, METHANE_ADAPTIVE_KMAX, METHANE_BOX, METHANE_HUMP, METHANE_UNIFORM_KMAX,
};
use hysteresis::solver::{SolverConfig, SolverMethod};
use hysteresis::{InitMode, Model, MonotoneCurve};

use crate::args::*;
use crate::CliError;

/// `x` with six significant digits, for human summaries.
pub(crate) fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        format!("{:.*}", (5 - mag).max(0) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

pub(crate) fn create(path: &Path) -> Result<Box<dyn Write>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::usage(format!("{}: {e}", dir.display())))?;
    }
    let f = File::create(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufWriter::new(f)))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) if p != Path::new("-") => create(p),
        _ => Ok(Box::new(io::stdout().lock())),
    }
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn points(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    read_points(open(path)?).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub(crate) fn load_model(path: &Path) -> Result<Model, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    model_from_toml(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub(crate) fn write_model(path: Option<&Path>, m: &Model) -> Result<(), CliError> {
    let mut out = output(path)?;
    out.write_all(model_to_toml(m)?.as_bytes()).map_err(|e| CliError::usage(e.to_string()))?;
    out.flush().map_err(|e| CliError::usage(e.to_string()))
}

fn curve(spec: &str) -> Result<MonotoneCurve, CliError> {
    if spec == "identity" {
        return Ok(MonotoneCurve::Identity);
    }
    MonotoneCurve::piecewise_linear(&points(Path::new(spec))?).map_err(|e| CliError::usage(format!("{spec}: {e}")))
}

/// Linear interpolation through `(t, y)` samples, constant beyond the ends.
fn interpolant(mut p: Vec<(f64, f64)>) -> Result<impl Fn(f64) -> f64 + Send + Sync + 'static, CliError> {
    if p.is_empty() {
        return Err(CliError::usage("empty time series"));
    }
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(move |t: f64| {
        let i = p.partition_point(|q| q.0 <= t);
        if i == 0 {
            return p[0].1;
        }
        if i == p.len() {
            return p[p.len() - 1].1;
        }
        let ((t0, y0), (t1, y1)) = (p[i - 1], p[i]);
        y0 + (y1 - y0) * (t - t0) / (t1 - t0)
    })
}

fn number(word: &str, what: &str) -> Result<f64, CliError> {
    word.parse().map_err(|_| CliError::usage(format!("{what}: `{word}` is not a number")))
}

/// Splits `name [VALUE]` and checks the value is present exactly when needed.
fn choice<'a>(words: &'a [String], what: &str, with_value: &[&str]) -> Result<(&'a str, Option<&'a str>), CliError> {
    let name = words.first().map(String::as_str).unwrap_or("");
    let value = words.get(1).map(String::as_str);
    match (with_value.contains(&name), value) {
        (true, None) => Err(CliError::usage(format!("--{what} {name} needs a value"))),
        (false, Some(v)) => Err(CliError::usage(format!("--{what} {name} takes no value, got `{v}`"))),
        _ => Ok((name, value)),
    }
}

fn init_mode(init: InitArg) -> InitMode {
    match init {
        InitArg::Left => InitMode::LeftCurve,
        InitArg::Right => InitMode::RightCurve,
    }
}

pub(crate) fn solver(s: SolverArg) -> SolverConfig {
    SolverConfig::with_method(match s {
        SolverArg::Newton => SolverMethod::Newton,
        SolverArg::Bracket => SolverMethod::Bracket,
        SolverArg::Fallback => SolverMethod::NewtonWithBracketFallback,
    })
}

fn graph(a: &CalibrateArgs) -> Result<GeneralizedTrapezoid, CliError> {
    let given = [a.langmuir.is_some(), a.graph.is_some(), a.left.is_some() || a.right.is_some()];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(CliError::usage("give exactly one of --langmuir, --graph, or --left with --right"));
    }
    if let Some(p) = &a.langmuir {
        let [vl, bl, vr, br] = p[..] else {
            return Err(CliError::usage(format!("--langmuir needs 4 values, got {}", p.len())));
        };
        return Ok(GeneralizedTrapezoid::langmuir_pair(vl, bl, vr, br)?);
    }
    if let Some(g) = a.graph {
        return Ok(match g {
            GraphArg::Methane => methane(),
            GraphArg::Convex => convex_concave(),
        });
    }
    match (&a.left, &a.right) {
        (Some(l), Some(r)) => Ok(GeneralizedTrapezoid::from_samples(points(l)?, points(r)?)?),
        _ => Err(CliError::usage("--left and --right go together")),
    }
}

pub fn calibrate(a: &CalibrateArgs) -> Result<(), CliError> {
    let pin = match a.pin {
        PinArg::Left => Pin::Left,
        PinArg::Right => Pin::Right,
    };
    let (model, summary) = if let Some(t) = &a.trapezoid {
        if a.family != FamilyArg::Nonlinear {
            return Err(CliError::usage("--trapezoid only fits the nonlinear family"));
        }
        let [alpha, beta, big_a, big_b, w_min, w_max] = t[..] else {
            return Err(CliError::usage(format!("--trapezoid needs 6 values, got {}", t.len())));
        };
        let trap = Trapezoid::new(alpha, beta, big_a, big_b, w_min, w_max)?;
        let fit = calibrate_trapezoid(&trap, a.kmax.unwrap_or(100), pin)?;
        let s = format!(
            "K = {} (m = {}, n = {}), mu* = {}, h* = {}, A* = {}, B* = {}, merged = {}",
            fit.model.len(),
            fit.m,
            fit.n,
            sig6(fit.mu_star),
            sig6(fit.h_star),
            sig6(fit.a_star),
            sig6(fit.b_star),
            fit.merged
        );
        (fit.model, s)
    } else {
        let g = graph(a)?;
        let model = match a.family {
            FamilyArg::Gamma => calibrate_generalized(g.left.clone(), g.right.clone()),
            FamilyArg::Nonlinear => {
                let (strategy, kmax) = match a.strategy {
                    StrategyArg::Uniform => (PartitionStrategy::Uniform, METHANE_UNIFORM_KMAX),
                    StrategyArg::Adaptive => (PartitionStrategy::Adaptive { tol: 0.0 }, METHANE_ADAPTIVE_KMAX),
                };
                let levels = partition_range(&g, a.slabs, strategy)?;
                let cfg = HierarchicalConfig {
                    kmax_per_slab: a.kmax.unwrap_or(kmax),
                    qmax: a.qmax,
                    tol: a.tol.unwrap_or(f64::INFINITY),
                    pin,
                    ..Default::default()
                };
                calibrate_hierarchical(&g, &levels, &cfg)?.model
            }
            FamilyArg::Linear => {
                let v = g.vertices()?;
                let k = a.k.max(1);
                let nodes: Vec<f64> = (0..=k).map(|i| v.beta + (v.b - v.beta) * i as f64 / k as f64).collect();
                calibrate_linear_play(&g.right, &nodes)?
            }
            FamilyArg::Preisach => {
                let variant = a.eps.map_or(PreisachVariant::Raw, PreisachVariant::Eps);
                calibrate_preisach(&g, a.k, variant)?
            }
            FamilyArg::PreisachSmooth => calibrate_preisach(&g, a.k, PreisachVariant::Smooth)?,
        };
        let err = boundary_error(&model, &g, 2000)?;
        let s = format!("K = {}, boundary error = {}", model.len(), sig6(err));
        (model, s)
    };
    write_model(a.out.as_deref(), &model)?;
    eprintln!("{summary}");
    Ok(())
}

pub fn scan(a: &ScanArgs) -> Result<(), CliError> {
    let m = load_model(&a.model)?;
    let mode = match &a.state {
        Some(v) => InitMode::Explicit(v.clone()),
        None => init_mode(a.init),
    };
    let mut s = m.init_state(a.peaks[0], &mode)?;
    let tr = hysteresis::model::scan(&m, &mut s, &a.peaks, a.samples)?;
    let rows = tr.u.iter().zip(&tr.w).map(|(&u, &w)| vec![u, w]);
    write_table(output(a.out.as_deref())?, &["u", "w"], rows)?;
    Ok(())
}

pub fn signature(a: &SignatureArgs) -> Result<(), CliError> {
    let m = load_model(&a.model)?;
    let rows = m.preisach_signature()?.into_iter().map(|(al, be, mu)| vec![al, be, mu]);
    write_table(output(a.out.as_deref())?, &["alpha", "beta", "mu"], rows)?;
    Ok(())
}

fn ode_problem(a: &OdeProblemArgs, tau: f64) -> Result<OdeProblem, CliError> {
    let (name, value) = choice(&a.source, "source", &["const", "csv"])?;
    let source = match name {
        "fcont" => Source::damped_sine(),
        "fdisc" => Source::damped_sine_sign(a.t_final),
        "intro" => Source::PiecewiseConstant { breaks: vec![9.0], values: vec![1.0, -1.0] },
        "const" => {
            let c = number(value.expect("checked"), "--source const")?;
            Source::PiecewiseConstant { breaks: Vec::new(), values: vec![c] }
        }
        "csv" => Source::smooth(interpolant(points(Path::new(value.expect("checked")))?)?),
        other => {
            return Err(CliError::usage(format!("--source: unknown `{other}` (fcont, fdisc, intro, const V, csv FILE)")))
        }
    };
    Ok(OdeProblem {
        a: curve(&a.a)?,
        model: load_model(&a.model)?,
        source,
        u_init: a.u0,
        init: init_mode(a.init),
        t_final: a.t_final,
        tau,
    })
}

pub fn ode(a: &OdeRunArgs) -> Result<(), CliError> {
    let p = ode_problem(&a.problem, a.tau)?;
    let cfg = solver(a.problem.solver);
    let run = integrate_ode(&p, &cfg)?;
    let rows = (0..run.t.len()).map(|n| {
        let it = if n == 0 { 0 } else { run.iterations[n - 1] };
        vec![run.t[n], run.u[n], run.w[n], it as f64]
    });
    write_table(output(a.out.as_deref())?, &["t", "u", "w", "iterations"], rows)?;
    eprintln!(
        "steps = {}, mean iterations = {}, fallbacks = {}",
        run.t.len() - 1,
        sig6(run.mean_iterations()),
        run.fallbacks
    );
    Ok(())
}

fn split_reference(xs: &[f64], what: &str) -> Result<(Vec<f64>, f64), CliError> {
    if xs.len() < 2 || xs.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(CliError::usage(format!("--{what} needs at least two positive values, the last is the reference")));
    }
    Ok((xs[..xs.len() - 1].to_vec(), xs[xs.len() - 1]))
}

pub fn ode_convergence(a: &OdeConvergenceArgs) -> Result<(), CliError> {
    let (taus, fine) = split_reference(&a.taus, "taus")?;
    let p = ode_problem(&a.problem, fine)?;
    let rep = convergence_study(&p, &taus, fine, &solver(a.problem.solver))?;
    let rows = (0..taus.len()).map(|i| vec![taus[i], rep.e_u[i], rep.e_w[i]]);
    write_table(output(a.out.as_deref())?, &["tau", "e_u", "e_w"], rows)?;
    summary(a.out.is_some(), &format!("p_u = {}, p_w = {}", sig6(rep.p_u), sig6(rep.p_w)));
    Ok(())
}

/// Summaries go to stdout unless stdout carries the CSV.
fn summary(csv_in_file: bool, line: &str) {
    if csv_in_file {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn pde_problem(a: &PdeProblemArgs) -> Result<PdeProblem, CliError> {
    let (lo, hi) = (a.x_min, a.x_max);
    let at = |q: f64| lo + q * (hi - lo);
    let (name, value) = choice(&a.init, "init", &["constant", "csv"])?;
    let u_init = match name {
        "box" => Profile::Steps { breaks: vec![at(0.25), at(0.5), at(0.75)], values: METHANE_BOX.to_vec() },
        "linear" => Profile::Points(METHANE_HUMP.iter().map(|&(x, u)| (at(x), u)).collect()),
        "constant" => Profile::Constant(number(value.expect("checked"), "--init constant")?),
        "csv" => Profile::Points(points(Path::new(value.expect("checked")))?),
        other => return Err(CliError::usage(format!("--init: unknown `{other}` (box, linear, constant V, csv FILE)"))),
    };
    let (name, value) = choice(&a.inflow, "inflow", &["const", "csv"])?;
    let inflow = match name {
        "ramp" => Inflow::dirichlet(intro_inflow),
        "zero" => Inflow::ZeroGradient,
        "const" => {
            let c = number(value.expect("checked"), "--inflow const")?;
            Inflow::dirichlet(move |_| c)
        }
        "csv" => Inflow::dirichlet(interpolant(points(Path::new(value.expect("checked")))?)?),
        other => return Err(CliError::usage(format!("--inflow: unknown `{other}` (ramp, zero, const V, csv FILE)"))),
    };
    Ok(PdeProblem {
        a: curve(&a.a)?,
        flux: curve(&a.flux)?,
        model: load_model(&a.model)?,
        x_min: lo,
        x_max: hi,
        h: a.h,
        u_init,
        init: init_mode(a.cell_init),
        inflow,
        t_final: a.t_final,
        lambda: a.lambda,
    })
}

pub fn pde(a: &PdeRunArgs) -> Result<(), CliError> {
    let p = pde_problem(&a.problem)?;
    let mut snapshots = a.snapshots.clone();
    if !snapshots.contains(&p.t_final) {
        snapshots.push(p.t_final);
    }
    let opts = RunOptions { snapshots, trace: true, total_variation: false };
    let run = integrate_pde(&p, &opts, &solver(a.problem.solver))?;
    for s in &run.snapshots {
        let path = format!("{}_t{}.csv", a.out_prefix, s.t);
        let rows = (0..run.x.len()).map(|j| vec![run.x[j], s.u[j], s.w[j]]);
        write_table(create(Path::new(&path))?, &["x", "u", "w"], rows)?;
    }
    let trace = run.trace.iter().map(|&(u, w)| vec![u, w]);
    write_table(create(Path::new(&format!("{}_trace.csv", a.out_prefix)))?, &["u", "w"], trace)?;
    let (defect, slack) = run.conservation_defect();
    println!(
        "cells = {}, steps = {}, mean iterations = {}, fallbacks = {}, mass defect = {} (slack {})",
        run.x.len(),
        run.times.len() - 1,
        sig6(run.mean_iterations()),
        run.fallbacks(),
        sig6(defect),
        sig6(slack)
    );
    Ok(())
}

pub fn pde_convergence(a: &PdeConvergenceArgs) -> Result<(), CliError> {
    let (hs, fine) = split_reference(&a.hs, "hs")?;
    let p = pde_problem(&a.problem)?;
    let rep = pde_study(&p, &hs, fine, &solver(a.problem.solver))?;
    let rows = (0..hs.len()).map(|i| vec![hs[i], rep.e_u[i], rep.e_w[i]]);
    write_table(output(a.out.as_deref())?, &["h", "e_u", "e_w"], rows)?;
    summary(a.out.is_some(), &format!("p_u = {}, p_w = {}", sig6(rep.p_u), sig6(rep.p_w)));
    Ok(())
}
