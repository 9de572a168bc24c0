//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

use std::f64::consts::{E, FRAC_PI_2};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use econflow_core::hydro::{run_hydro, GaussianBump, HydroRun, HydroSettings, InitialCondition, MomentSet};
use econflow_core::kinetic::{run_kinetic, KineticConfig, TransactionKernel, VelocityProcess};
use econflow_core::reduced::{
    analytic_pz_credit, conserved_quadratics, fit_closed_form, fit_cycle_parameters, integrate, quadratic_scales,
    CycleAxis, CycleParameters, FitOptions, ReducedState, TimeSeries,
};
use econflow_core::validation::{check_kinetic_run, check_moment_budgets, compare_hydro_vs_ode};
use econflow_core::{make_grid, AxisCoupling, CouplingParams, EconomicDomain, GridSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

#[allow(clippy::too_many_arguments)]
fn axis(c_x: f64, d_x: f64, c_y: f64, d_y: f64, mu_x: f64, eta_x: f64, mu_y: f64, eta_y: f64) -> AxisCoupling {
    AxisCoupling {
        c_x,
        c_y,
        d_x,
        d_y,
        mu_x,
        mu_y,
        eta_x,
        eta_y,
    }
}

fn generic_params() -> CouplingParams {
    CouplingParams::new(0.3, -0.2, vec![axis(1.0, -4.0, 1.5, -6.0, 0.2, 0.05, -0.3, -0.12)]).unwrap()
}

fn generic_state() -> ReducedState {
    let mut s = ReducedState::zeros(1);
    s.credit = 1.0;
    s.repayment = 0.5;
    let a = &mut s.axes[0];
    a.px = 0.4;
    a.py = -0.2;
    a.dx = 0.1;
    a.dy = 0.3;
    a.pzx = 0.2;
    a.pzy = 0.1;
    a.dzx = -0.1;
    a.dzy = 0.05;
    a.ecx = 0.3;
    a.ecy = 0.2;
    a.erx = 0.1;
    a.ery = -0.15;
    s
}

fn criterion_1() -> Outcome {
    let p = CouplingParams::new(0.0, 0.0, vec![axis(1.0, -4.0, 1.0, -1.0, 1.0, 1.0, 1.0, 1.0)]).unwrap();
    let mut s = ReducedState::zeros(1);
    s.axes[0].px = 1.0;
    let dt = 1e-3;
    let traj = integrate(&s, &p, dt, 10_000).unwrap();
    let err = traj
        .iter()
        .map(|st| (st.axes[0].px - (2.0 * st.time).cos()).abs())
        .fold(0.0, f64::max);
    let mut crossings = Vec::new();
    for w in traj.windows(2) {
        let (a, b) = (w[0].axes[0].px, w[1].axes[0].px);
        if a != 0.0 && a.signum() != b.signum() {
            crossings.push(w[0].time + dt * a / (a - b));
        }
    }
    let spacing_err = crossings
        .windows(2)
        .map(|c| ((c[1] - c[0]) - FRAC_PI_2).abs() / FRAC_PI_2)
        .fold(0.0, f64::max);
    outcome(
        err <= 1e-8 && crossings.len() >= 5 && spacing_err <= 1e-3,
        format!(
            "max |Px - cos 2t| = {err:.2e}; {} zero crossings, worst spacing error {:.2e}",
            crossings.len(),
            spacing_err
        ),
    )
}

fn criterion_2() -> Outcome {
    let p = CouplingParams::new(0.0, 0.0, vec![axis(1.0, -1.0, 1.0, -1.0, 1.0, 1.0, 1.0, 1.0)]).unwrap();
    let mut s = ReducedState::zeros(1);
    s.axes[0].ecx = 1.0;
    s.axes[0].erx = 1.0;
    let traj = integrate(&s, &p, 1e-4, 100_000).unwrap();
    let last = traj.last().unwrap();
    let expect = E.powi(10);
    let rel = (last.axes[0].ecx - expect).abs() / expect;
    outcome(
        rel <= 1e-7,
        format!("EC(10) relative error {rel:.2e} at t = {:.6}", last.time),
    )
}

/// Per component: largest deviation over the trajectory divided by the
/// largest reference magnitude.
fn componentwise_rel(observed: &[ReducedState], reference: &[ReducedState]) -> f64 {
    let dim = reference[0].dimension();
    (0..dim)
        .map(|k| {
            let mut err = 0.0f64;
            let mut scale = 0.0f64;
            for (o, r) in observed.iter().zip(reference) {
                let (o, r) = (o.to_vector()[k], r.to_vector()[k]);
                err = err.max((o - r).abs());
                scale = scale.max(r.abs());
            }
            if scale > 0.0 {
                err / scale
            } else {
                err
            }
        })
        .fold(0.0, f64::max)
}

fn criterion_3() -> Outcome {
    let p = generic_params();
    let s = generic_state();
    let coarse = integrate(&s, &p, 1e-3, 10_000).unwrap();
    let series = TimeSeries::new(
        coarse.iter().map(|st| st.time).collect(),
        coarse.iter().map(|st| st.credit).collect(),
    )
    .unwrap();
    let cf = fit_closed_form(&series, &p.derived()).unwrap();

    let fine = integrate(&s, &p, 1e-4, 100_000).unwrap();
    let sampled: Vec<ReducedState> = fine.iter().step_by(100).cloned().collect();
    let analytic: Vec<ReducedState> = sampled
        .iter()
        .map(|st| analytic_pz_credit(&p, &s, st.time).unwrap())
        .collect();
    let rel = componentwise_rel(&analytic, &sampled);
    outcome(
        cf.max_abs_residual < 1e-8 && rel <= 1e-6,
        format!(
            "closed-form max residual {:.2e}; analytic vs RK4 worst component {rel:.2e}",
            cf.max_abs_residual
        ),
    )
}

fn criterion_4() -> Outcome {
    let p = generic_params();
    let s = generic_state();
    let traj = integrate(&s, &p, 1e-3, 10_000).unwrap();
    let q0 = conserved_quadratics(&s, &p).unwrap()[0];
    let (mut imp, mut en) = (0.0f64, 0.0f64);
    for st in &traj {
        let q = conserved_quadratics(st, &p).unwrap()[0];
        let sc = quadratic_scales(st, &p).unwrap()[0];
        imp = imp
            .max((q.impulse_x - q0.impulse_x).abs() / sc.impulse_x)
            .max((q.impulse_y - q0.impulse_y).abs() / sc.impulse_y);
        en = en
            .max((q.energy_x - q0.energy_x).abs() / sc.energy_x)
            .max((q.energy_y - q0.energy_y).abs() / sc.energy_y);
    }
    outcome(
        imp < 1e-8 && en < 1e-8,
        format!("impulse quadratic drift {imp:.2e}, energy quadratic drift {en:.2e}"),
    )
}

fn grid(m: usize) -> Arc<GridSpec> {
    Arc::new(make_grid(EconomicDomain::unit(1).unwrap(), m).unwrap())
}

/// Credit and repayment bumps at the center over a resting background.
fn bumps(background: f64, width: f64, v0: f64) -> InitialCondition {
    let bump = |mass: f64, velocity: Vec<f64>| GaussianBump {
        center: vec![0.5, 0.5],
        width,
        mass,
        velocity,
        background,
    };
    InitialCondition {
        credit: bump(1.0, vec![v0, -0.8 * v0]),
        repayment: bump(1.2, vec![-0.6 * v0, 0.4 * v0]),
    }
}

fn hydro_params(a: f64, c: f64) -> CouplingParams {
    CouplingParams::new(a, 0.8, vec![axis(c, -c, 1.2 * c, -1.2 * c, 0.2, 0.2, 0.1, 0.3)]).unwrap()
}

fn hydro(ic: &InitialCondition, p: &CouplingParams, m: usize, dt: f64, steps: usize) -> HydroRun {
    let g = grid(m);
    let init = ic.build(&g, 1e-8).unwrap();
    let st = HydroSettings::for_state(&init, 0.5, 1e-8);
    run_hydro(init, p, &st, dt, steps, None).unwrap()
}

fn criterion_5() -> Outcome {
    let p = hydro_params(1.0, 1.0);
    let dt = 0.0398;
    let run = hydro(&bumps(30.0, 0.15, 0.05), &p, 64, dt, 1000);
    let rep = check_moment_budgets(&run.moments, &p, dt, 0.05).unwrap();
    let exact = ["C", "LR", "Px1", "Py1", "Dx1", "Dy1", "ECx1", "ECy1", "ERx1", "ERy1"];
    let worst = exact
        .iter()
        .map(|n| rep.quantity(n).unwrap().max_rel_error)
        .fold(0.0, f64::max);
    let all_pass = exact.iter().all(|n| rep.quantity(n).unwrap().pass);
    let flux_zero = run.moments.iter().all(|m| m.boundary_flux == 0.0);
    outcome(
        all_pass && worst <= 1e-10 && flux_zero && run.moments.len() == 1001,
        format!(
            "worst exact-budget error {worst:.2e} over 1000 steps; peak CFL {:.3} (limit 0.5); boundary flux identically 0: {flux_zero}",
            run.peak_cfl
        ),
    )
}

fn pz_residual(series: &[MomentSet], p: &CouplingParams, dt: f64) -> (f64, f64) {
    let rep = check_moment_budgets(series, p, dt, 0.05).unwrap();
    (
        rep.quantity("Pzx1").unwrap().max_rel_error,
        rep.quantity("Pzy1").unwrap().max_rel_error,
    )
}

fn mean_risks_contained(series: &[MomentSet]) -> bool {
    series.iter().all(|m| {
        m.credit_mean_risk
            .iter()
            .chain(&m.loan_mean_risk)
            .flatten()
            .all(|x| (0.0..=1.0).contains(x))
            && m.credit_mean_risk.is_some()
    })
}

fn criterion_6() -> Outcome {
    let p = hydro_params(1.0, 0.5);
    let ic = bumps(5.0, 0.15, 0.05);
    let coarse = hydro(&ic, &p, 64, 0.002, 2500);
    let initial = ReducedState::from_moments(&coarse.moments[0]);
    let cmp = compare_hydro_vs_ode(&coarse.moments, &p, &initial, 0.002, 0.005).unwrap();
    let worst = cmp.quantities.iter().map(|q| q.max_rel_error).fold(0.0, f64::max);
    let fine = hydro(&ic, &p, 128, 0.001, 5000);
    let (cx, cy) = pz_residual(&coarse.moments, &p, 0.002);
    let (fx, fy) = pz_residual(&fine.moments, &p, 0.001);
    let (rx, ry) = (cx / fx, cy / fy);
    outcome(
        cmp.pass && worst <= 0.005 && rx >= 1.5 && ry >= 1.5,
        format!(
            "worst tracking error {worst:.2e} over t in [0, 5]; Pz residual m=64 ({cx:.2e}, {cy:.2e}) -> m=128 ({fx:.2e}, {fy:.2e}), ratios {rx:.2}, {ry:.2}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let cfg = KineticConfig {
        agent_count: 1000,
        seed: 2024,
        dt: 0.01,
        velocity: VelocityProcess {
            theta: vec![1.0],
            sigma: vec![0.5],
        },
        kernel: TransactionKernel {
            rate: 0.1,
            amount_scale: 1.0,
            amount_shape: 0.75,
        },
    };
    let steps = run_kinetic(&cfg, &grid(16), 100).unwrap();
    let records: usize = steps.iter().map(|s| s.records.len()).sum();
    let rep = check_kinetic_run(&steps, cfg.dt).unwrap();
    let worst = rep.quantities.iter().map(|q| q.max_rel_error).fold(0.0, f64::max);
    outcome(
        rep.pass && steps.len() == 100 && worst <= 1e-12,
        format!("{records} transactions over 100 steps; worst aggregation error {worst:.2e}"),
    )
}

/// Largest `|Δ(C·X_C)/dt − P_x|` relative to the largest `|P_x|`.
fn mean_risk_law(series: &[MomentSet], dt: f64) -> f64 {
    let cx = |m: &MomentSet| m.credit * m.credit_mean_risk.as_ref().unwrap()[0];
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for w in series.windows(2) {
        err = err.max(((cx(&w[1]) - cx(&w[0])) / dt - w[0].axes[0].px).abs());
        scale = scale.max(w[0].axes[0].px.abs());
    }
    err / scale
}

fn criterion_8() -> Outcome {
    let ic = bumps(5.0, 0.15, 0.05);
    let generic = hydro(&ic, &hydro_params(1.0, 0.5), 64, 0.002, 2500);
    let nonneg = generic.moments.iter().all(|m| m.min_credit >= 0.0);
    let contained_generic = mean_risks_contained(&generic.moments);
    let p = hydro_params(0.0, 0.5);
    let coarse = hydro(&ic, &p, 64, 0.002, 2500);
    let fine = hydro(&ic, &p, 128, 0.001, 5000);
    let contained = contained_generic && mean_risks_contained(&coarse.moments) && mean_risks_contained(&fine.moments);
    let (e64, e128) = (
        mean_risk_law(&coarse.moments, 0.002),
        mean_risk_law(&fine.moments, 0.001),
    );
    outcome(
        nonneg && contained && e64 <= 0.05 && e128 < e64,
        format!("X_C, X_L within [0, 1]: {contained}; a=0 law error m=64 {e64:.2e}, m=128 {e128:.2e}"),
    )
}

fn synthetic() -> CycleParameters {
    CycleParameters {
        c0: 1.0,
        axes: vec![CycleAxis {
            alpha: 0.5,
            beta: 0.3,
            omega: 2.0,
            delta: 0.2,
            zeta: -0.4,
            nu: 3.0,
        }],
        kappa: 0.1,
        gamma: 0.1,
    }
}

fn criterion_9() -> Outcome {
    let truth = synthetic();
    let times: Vec<f64> = (0..=500).map(|k| k as f64 * 0.02).collect();
    let clean: Vec<f64> = times.iter().map(|t| truth.eval(*t)).collect();
    let guess = CycleParameters::from_vector(&truth.to_vector().iter().map(|v| v * 1.05).collect::<Vec<_>>());
    let opts = FitOptions::default();

    let series = TimeSeries::new(times.clone(), clean.clone()).unwrap();
    let rep = fit_cycle_parameters(&series, 1, &guess, &opts).unwrap();
    let param_err = rep
        .parameters
        .to_vector()
        .iter()
        .zip(truth.to_vector())
        .map(|(f, t)| (f - t).abs() / t.abs())
        .fold(0.0, f64::max);

    let sd = 0.01 * clean.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let noise = Normal::new(0.0, sd).unwrap();
    let mut errs: Vec<f64> = (0..100u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noisy = clean.iter().map(|v| v + noise.sample(&mut rng)).collect();
            let s = TimeSeries::new(times.clone(), noisy).unwrap();
            let r = fit_cycle_parameters(&s, 1, &guess, &opts).unwrap();
            let a = r.parameters.axes[0];
            ((a.omega - 2.0).abs() / 2.0).max((a.nu - 3.0).abs() / 3.0)
        })
        .collect();
    errs.sort_by(f64::total_cmp);
    let p95 = errs[94];
    outcome(
        rep.converged && param_err <= 1e-6 && p95 <= 0.01,
        format!(
            "noiseless worst parameter error {param_err:.2e} (rmse {:.2e}); 1% noise frequency error p95 {p95:.2e} over 100 seeds",
            rep.rmse
        ),
    )
}

const REPRO_COUPLING: &str = r#"
[coupling]
a = 1.0
b = 0.8

[[coupling.axis]]
c_x = 0.5
d_x = -0.5
c_y = 0.6
d_y = -0.6
mu_x = 0.2
eta_x = 0.2
mu_y = 0.1
eta_y = 0.3
"#;

const REPRO_HYDRO: &str = r#"
seed = 3
dt = 0.02
steps = 50

[domain]
n = 1

[grid]
cells_per_axis = 16

[initial.credit]
center = [0.5, 0.5]
width = 0.15
mass = 1.0
velocity = [0.05, -0.04]
background = 5.0

[initial.repayment]
center = [0.5, 0.5]
width = 0.15
mass = 1.2
velocity = [-0.03, 0.02]
background = 5.0

[kinetic]
agents = 100
theta = [1.0]
sigma = [0.3]
rate = 0.2
amount_scale = 1.0
amount_shape = 0.5

[validate]
tracking_tolerance = 0.05

[output]
snapshot_every = 25
transactions = true
"#;

/// Every file except the manifest, which records wall time.
fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                let name = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((name, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn econflow(mode: &str, config: &Path, out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_econflow"))
        .args([mode, "--config"])
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .output()
        .unwrap()
        .status
        .success()
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    let hydro_cfg = base.join("hydro.toml");
    std::fs::write(&hydro_cfg, format!("{REPRO_HYDRO}\n{REPRO_COUPLING}")).unwrap();
    let ode_cfg = base.join("ode.toml");
    std::fs::write(
        &ode_cfg,
        format!(
            "dt = 0.01\nsteps = 1000\n[domain]\nn = 1\n[grid]\ncells_per_axis = 16\n{}\n{REPRO_COUPLING}",
            &REPRO_HYDRO[REPRO_HYDRO.find("[initial.credit]").unwrap()..REPRO_HYDRO.find("[kinetic]").unwrap()]
        ),
    )
    .unwrap();
    let fit_cfg = base.join("fit.toml");
    std::fs::write(
        &fit_cfg,
        format!("[fit]\ninput = \"ode_a/moments.csv\"\n{REPRO_COUPLING}"),
    )
    .unwrap();

    let mut notes = Vec::new();
    let mut pass = true;
    let modes = [
        ("kinetic", &hydro_cfg),
        ("hydro", &hydro_cfg),
        ("ode", &ode_cfg),
        ("analytic", &ode_cfg),
        ("validate", &hydro_cfg),
        ("fit", &fit_cfg),
    ];
    for (mode, cfg) in modes {
        let (a, b) = (base.join(format!("{mode}_a")), base.join(format!("{mode}_b")));
        let ok = econflow(mode, cfg, &a) && econflow(mode, cfg, &b);
        let (fa, fb) = (artifacts(&a), artifacts(&b));
        let csvs = fa.iter().filter(|(n, _)| n.ends_with(".csv")).count();
        let same = ok && csvs > 0 && fa == fb;
        pass &= same;
        notes.push(format!("{mode} {}", if same { "identical" } else { "DIFFERENT" }));
    }
    outcome(pass, notes.join(", "))
}

fn main() {
    // name, check, runtime budget in seconds
    type Criterion = (&'static str, fn() -> Outcome, Option<f64>);
    let criteria: [Criterion; 10] = [
        ("harmonic oscillation", criterion_1, Some(1.0)),
        ("exponential energy modes", criterion_2, Some(5.0)),
        ("business-cycle form", criterion_3, Some(10.0)),
        ("conserved quadratics", criterion_4, None),
        ("exact discrete moment budgets", criterion_5, Some(30.0)),
        ("moment-reduction fidelity", criterion_6, Some(300.0)),
        ("kinetic aggregation", criterion_7, Some(30.0)),
        ("mean-risk containment and a=0 law", criterion_8, None),
        ("fit round-trip", criterion_9, Some(60.0)),
        ("reproducibility", criterion_10, None),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut r = check();
        let took: Duration = start.elapsed();
        if let Some(b) = budget {
            if took.as_secs_f64() > *b {
                r.pass = false;
                r.detail.push_str(&format!("; over the {b} s runtime budget"));
            }
        }
        failed += usize::from(!r.pass);
        println!(
            "criterion {:>2} {:<36} {} ({:.2} s): {}",
            i + 1,
            name,
            if r.pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            r.detail
        );
    }
    println!(
        "{} of {} acceptance criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
