//! Data behind the figures and tables. Every target writes CSV files into
//! the output directory; nothing depends on wall-clock time except the
//! separate `table3_times.csv`.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use hysteresis::calibration::{
    boundary_sweep, calibrate_preisach, GeneralizedTrapezoid, HierarchicalFit, PreisachVariant,
};
use hysteresis::io::{fmt17, write_table};
use hysteresis::model::scan;
use hysteresis::ode::{convergence_study, integrate as integrate_ode};
use hysteresis::pde::{integrate as integrate_pde, pde_convergence, PdeProblem, RunOptions};
use hysteresis::presets::*;
use hysteresis::solver::SolverConfig;
use hysteresis::{InitMode, Model, ModelKind};

use crate::args::{ReproduceArgs, SolverArg, Target};
use crate::commands::{create, sig6, solver, write_model};
use crate::CliError;

const ALL: [Target; 12] = [
    Target::Intro,
    Target::Fig2,
    Target::Fig5,
    Target::Fig6,
    Target::Fig7,
    Target::Fig8,
    Target::Fig9,
    Target::Fig10,
    Target::Fig11,
    Target::Table3,
    Target::Table4,
    Target::Table5,
];

struct Out {
    dir: PathBuf,
}

impl Out {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
        write_table(create(&self.path(name))?, header, rows)?;
        Ok(())
    }

    /// Table with text columns; fields never contain commas.
    fn text(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut f = create(&self.path(name))?;
        let mut body = header.join(",") + "\n";
        for r in rows {
            body.push_str(&r.join(","));
            body.push('\n');
        }
        f.write_all(body.as_bytes()).and_then(|_| f.flush()).map_err(|e| CliError::usage(e.to_string()))
    }

    fn trace(&self, name: &str, m: &Model, init: &InitMode, peaks: &[f64], samples: usize) -> Result<(), CliError> {
        let mut s = m.init_state(peaks[0], init)?;
        let tr = scan(m, &mut s, peaks, samples)?;
        self.csv(name, &["u", "w"], tr.u.iter().zip(&tr.w).map(|(&u, &w)| vec![u, w]))
    }

    fn curves(&self, name: &str, g: &GeneralizedTrapezoid, lo: f64, hi: f64) -> Result<(), CliError> {
        let n = 400;
        let rows = (0..=n).map(|i| {
            let u = lo + (hi - lo) * i as f64 / n as f64;
            vec![u, g.left.eval(u), g.right.eval(u)]
        });
        self.csv(name, &["u", "left", "right"], rows)
    }
}

pub fn run(a: &ReproduceArgs) -> Result<(), CliError> {
    let targets = if a.target == Target::All { ALL.to_vec() } else { vec![a.target] };
    let out = Out { dir: a.out_dir.clone() };
    std::fs::create_dir_all(&out.dir).map_err(|e| CliError::usage(format!("{}: {e}", out.dir.display())))?;
    for t in targets {
        let t0 = Instant::now();
        match t {
            Target::Intro => intro(&out)?,
            Target::Fig2 => fig2(&out)?,
            Target::Fig5 => fig5(&out)?,
            Target::Fig6 => fig6(&out)?,
            Target::Fig7 => fig7(&out)?,
            Target::Fig8 => fig8(&out)?,
            Target::Fig9 => fig9(&out)?,
            Target::Fig10 => fig10(&out)?,
            Target::Fig11 => fig11(&out)?,
            Target::Table3 => table3(&out)?,
            Target::Table4 => table4(&out)?,
            Target::Table5 => table5(&out)?,
            Target::All => unreachable!(),
        }
        eprintln!("{t:?}: {:.1} s", t0.elapsed().as_secs_f64());
    }
    Ok(())
}

fn intro(out: &Out) -> Result<(), CliError> {
    let m = intro_model();
    let n = 1000;
    let mut s = m.init_state(0.0, &InitMode::LeftCurve)?;
    let tr = scan(&m, &mut s, &[0.0, 5.0, 0.0], n)?;
    let rows = tr.u.iter().zip(&tr.w).enumerate().map(|(i, (&u, &w))| {
        let exact = intro_loop(u, i <= n);
        vec![u, exact, u + exact, w]
    });
    out.csv("intro_path.csv", &["u", "w", "m", "w_model"], rows)?;

    let run = integrate_ode(&intro_ode(0.01), &SolverConfig::default())?;
    out.csv("intro_ode.csv", &["t", "u", "w"], (0..run.t.len()).map(|n| vec![run.t[n], run.u[n], run.w[n]]))?;

    let p = intro_ibvp(0.01);
    pde_snapshots(out, "intro_ibvp", &p, &[4.0, 5.0, 6.0, 7.0, 8.0, 9.0])
}

fn pde_snapshots(out: &Out, prefix: &str, p: &PdeProblem, times: &[f64]) -> Result<(), CliError> {
    let opts = RunOptions { snapshots: times.to_vec(), trace: true, total_variation: false };
    let run = integrate_pde(p, &opts, &SolverConfig::default())?;
    for s in &run.snapshots {
        let rows = (0..run.x.len()).map(|j| vec![run.x[j], s.u[j], s.w[j]]);
        out.csv(&format!("{prefix}_t{}.csv", s.t), &["x", "u", "w"], rows)?;
    }
    out.csv(&format!("{prefix}_trace.csv"), &["u", "w"], run.trace.iter().map(|&(u, w)| vec![u, w]))
}

fn fig2(out: &Out) -> Result<(), CliError> {
    for (name, m, path, init) in unit_hysterons() {
        out.trace(&format!("fig2_{name}.csv"), &m, &init, &path, 200)?;
    }
    Ok(())
}

fn fig5(out: &Out) -> Result<(), CliError> {
    for (name, rows) in STACKINGS {
        let m = Model::from_rows(ModelKind::KNonlinear, &rows)?;
        out.trace(&format!("fig5_{name}.csv"), &m, &InitMode::LeftCurve, &[0.0, 6.0, 0.0], 300)?;
    }
    let coarse = Model::from_rows(ModelKind::KNonlinear, &TWO_WAY_COARSE)?;
    let fine = Model::from_rows(ModelKind::KNonlinear, &TWO_WAY_FINE)?;
    for (name, m) in [("two_way_coarse", &coarse), ("two_way_fine", &fine)] {
        out.trace(&format!("fig5_{name}_outer.csv"), m, &InitMode::LeftCurve, &[4.0, 10.0, 4.0], 300)?;
        out.trace(&format!("fig5_{name}_probe.csv"), m, &InitMode::LeftCurve, &TWO_WAY_PROBE, 300)?;
    }
    Ok(())
}

fn methane_fits() -> Result<[(&'static str, HierarchicalFit); 2], CliError> {
    Ok([("uniform", methane_nonlinear(false)?), ("adaptive", methane_nonlinear(true)?)])
}

fn fig6(out: &Out) -> Result<(), CliError> {
    let g = methane();
    out.curves("fig6_curves.csv", &g, 0.0, 1000.0)?;
    let mut summary = Vec::new();
    for (label, fit) in methane_fits()? {
        write_model(Some(&out.path(&format!("fig6_{label}.toml"))), &fit.model)?;
        let sweep = boundary_sweep(&fit.model, &g, 500)?;
        let rows = sweep.into_iter().map(|(u, w, up)| vec![u, w, if up { 1.0 } else { 0.0 }]);
        out.csv(&format!("fig6_{label}_sweep.csv"), &["u", "w", "increasing"], rows)?;
        out.csv(&format!("fig6_{label}_levels.csv"), &["w"], fit.levels.iter().map(|&w| vec![w]))?;
        summary.push(vec![
            label.to_string(),
            (fit.levels.len() - 1).to_string(),
            fit.total_k().to_string(),
            fmt17(fit.boundary_error),
        ]);
    }
    out.text("fig6_summary.csv", &["strategy", "slabs", "k", "boundary_error"], &summary)
}

fn fig7(out: &Out) -> Result<(), CliError> {
    out.curves("fig7_curves.csv", &convex_concave(), 1.0, 3.0)?;
    let models = [
        ("gamma", convex_family(Family::Gamma, 0, 0.0)?),
        ("nonlinear", convex_family(Family::Nonlinear, 0, 0.0)?),
        ("linear_50", convex_family(Family::Linear, 50, 0.0)?),
        ("preisach_eps_100", convex_family(Family::PreisachEps, 100, 0.1)?),
    ];
    for (label, m) in &models {
        out.trace(&format!("fig7_{label}.csv"), m, &InitMode::LeftCurve, &CONVEX_INPUT, 200)?;
    }
    Ok(())
}

fn fig8(out: &Out) -> Result<(), CliError> {
    let g = methane();
    let [(_, uniform), (_, adaptive)] = methane_fits()?;
    let models = [
        ("gamma", gamma_model(&g)),
        ("nonlinear_uniform", uniform.model),
        ("nonlinear_adaptive", adaptive.model),
        ("preisach_eps_100", calibrate_preisach(&g, 100, PreisachVariant::Eps(0.1))?),
    ];
    for (label, m) in &models {
        out.trace(&format!("fig8_{label}.csv"), m, &InitMode::LeftCurve, &METHANE_INPUT, 200)?;
    }
    Ok(())
}

fn fig9_models() -> Result<Vec<(String, Model)>, CliError> {
    let mut v = Vec::new();
    for f in Family::ALL {
        let k = if f == Family::Linear { 50 } else { 100 };
        v.push((f.label().replace('-', "_"), convex_family(f, k, 0.1)?));
    }
    Ok(v)
}

fn fig9(out: &Out) -> Result<(), CliError> {
    for (label, m) in fig9_models()? {
        for (src, disc) in [("cont", false), ("disc", true)] {
            let run = integrate_ode(&convex_ode(m.clone(), disc, 0.01), &SolverConfig::default())?;
            let rows = (0..run.t.len()).map(|n| vec![run.t[n], run.u[n], run.w[n]]);
            out.csv(&format!("fig9_{label}_{src}.csv"), &["t", "u", "w"], rows)?;
        }
    }
    Ok(())
}

fn fig10(out: &Out) -> Result<(), CliError> {
    for (label, rows) in [("monotone", STACK_MONOTONE), ("nested", STACK_NESTED)] {
        let m = Model::from_rows(ModelKind::KNonlinear, &rows)?;
        out.trace(&format!("fig10_{label}.csv"), &m, &InitMode::LeftCurve, &RICH_INPUT, 100)?;
    }
    Ok(())
}

fn fig11(out: &Out) -> Result<(), CliError> {
    let models = [
        ("monotone", Model::from_rows(ModelKind::KNonlinear, &STACK_MONOTONE)?),
        ("nested", Model::from_rows(ModelKind::KNonlinear, &STACK_NESTED)?),
        ("methane_adaptive", methane_nonlinear(true)?.model),
        ("convex_nonlinear", convex_nonlinear()?.model),
    ];
    for (label, m) in &models {
        let rows = m.preisach_signature()?.into_iter().map(|(a, b, mu)| vec![a, b, mu]);
        out.csv(&format!("fig11_{label}.csv"), &["alpha", "beta", "mu"], rows)?;
    }
    Ok(())
}

const TAUS: [f64; 3] = [0.1, 0.01, 0.001];

fn table3(out: &Out) -> Result<(), CliError> {
    let cases: Vec<(&str, Model, bool)> = vec![
        ("none", convex_family(Family::NoHysteresis, 0, 0.0)?, false),
        ("gamma", convex_family(Family::Gamma, 0, 0.0)?, false),
        ("gamma", convex_family(Family::Gamma, 0, 0.0)?, true),
        ("nonlinear", convex_nonlinear()?.model, true),
        ("nonlinear", convex_nonlinear_with(CONVEX_LARGE_KMAX)?.model, true),
        ("linear", convex_family(Family::Linear, 50, 0.0)?, true),
        ("linear", convex_family(Family::Linear, 200, 0.0)?, true),
        ("preisach_eps", convex_family(Family::PreisachEps, 100, 0.1)?, true),
        ("preisach_smooth", convex_family(Family::PreisachSmooth, 100, 0.0)?, true),
    ];
    let methods = [("bracket", SolverArg::Bracket), ("newton", SolverArg::Newton), ("fallback", SolverArg::Fallback)];
    let mut rows = Vec::new();
    let mut times = Vec::new();
    for (label, m, disc) in &cases {
        let src = if *disc { "disc" } else { "cont" };
        for (mname, method) in methods {
            for tau in TAUS {
                let t0 = Instant::now();
                let res = integrate_ode(&convex_ode(m.clone(), *disc, tau), &solver(method));
                let secs = t0.elapsed().as_secs_f64();
                let (mean, fallbacks, status) = match &res {
                    Ok(r) => (fmt17(r.mean_iterations()), r.fallbacks.to_string(), "ok".to_string()),
                    Err(e) => (String::new(), String::new(), format!("failed: {e}")),
                };
                let key = vec![label.to_string(), m.len().to_string(), src.to_string(), mname.to_string(), fmt17(tau)];
                rows.push([key.clone(), vec![mean, fallbacks, status]].concat());
                times.push([key, vec![format!("{secs:.3}")]].concat());
            }
        }
    }
    out.text(
        "table3.csv",
        &["case", "k", "source", "method", "tau", "mean_iterations", "fallbacks", "status"],
        &rows,
    )?;
    out.text("table3_times.csv", &["case", "k", "source", "method", "tau", "seconds"], &times)
}

fn table4(out: &Out) -> Result<(), CliError> {
    let gamma = convex_family(Family::Gamma, 0, 0.0)?;
    let nonlinear = convex_nonlinear()?.model;
    let cases = [
        ("gamma", gamma.clone(), false),
        ("gamma", gamma, true),
        ("nonlinear", nonlinear.clone(), false),
        ("nonlinear_erf", smoothed(&nonlinear)?, true),
    ];
    let mut rows = Vec::new();
    let mut order = Vec::new();
    for (label, m, disc) in cases {
        let src = if disc { "disc" } else { "cont" };
        let rep = convergence_study(&convex_ode(m, disc, 1e-4), &TAUS, 1e-4, &SolverConfig::default())?;
        for i in 0..TAUS.len() {
            rows.push(vec![label.into(), src.into(), fmt17(TAUS[i]), fmt17(rep.e_u[i]), fmt17(rep.e_w[i])]);
        }
        order.push(vec![label.into(), src.into(), fmt17(rep.p_u), fmt17(rep.p_w)]);
        println!("{label} {src}: E_u = {:?}, p_u = {}", rep.e_u.iter().map(|&e| sig6(e)).collect::<Vec<_>>(), sig6(rep.p_u));
    }
    out.text("table4.csv", &["case", "source", "tau", "e_u", "e_w"], &rows)?;
    out.text("table4_order.csv", &["case", "source", "p_u", "p_w"], &order)
}

fn table5(out: &Out) -> Result<(), CliError> {
    let g = methane();
    let nonlinear = methane_nonlinear(true)?.model;
    let coarse = [0.01, 0.005, 0.001];
    let wide = [0.05, 0.01, 0.005, 0.001];
    let cases: [(&str, PdeProblem, &[f64], f64); 4] = [
        ("gamma_box", methane_box(gamma_model(&g), 0.01), &coarse, 1e-4),
        ("gamma_box", methane_box(gamma_model(&g), 0.01), &coarse, 5e-4),
        ("nonlinear_box", methane_box(nonlinear.clone(), 0.01), &wide, 5e-4),
        ("nonlinear_hump", methane_hump(nonlinear, 0.01), &wide, 5e-4),
    ];
    let mut rows = Vec::new();
    let mut order = Vec::new();
    for (label, p, hs, fine) in cases {
        let rep = pde_convergence(&p, hs, fine, &SolverConfig::default())?;
        for i in 0..hs.len() {
            rows.push(vec![label.into(), fmt17(hs[i]), fmt17(fine), fmt17(rep.e_u[i]), fmt17(rep.e_w[i])]);
        }
        order.push(vec![label.into(), p.model.len().to_string(), fmt17(fine), fmt17(rep.p_u), fmt17(rep.p_w)]);
        println!(
            "{label} (K = {}, reference h = {fine}): E_u = {:?}, p_u = {}",
            p.model.len(),
            rep.e_u.iter().map(|&e| sig6(e)).collect::<Vec<_>>(),
            sig6(rep.p_u)
        );
    }
    out.text("table5.csv", &["case", "h", "h_ref", "e_u", "e_w"], &rows)?;
    out.text("table5_order.csv", &["case", "k", "h_ref", "p_u", "p_w"], &order)
}
