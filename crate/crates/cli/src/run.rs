//! Mode drivers.

use std::path::{Path, PathBuf};
use std::time::Instant;

use econflow_core::hydro::{compute_moments, run_hydro, HydroRun, HydroSettings};
use econflow_core::kinetic::run_kinetic;
use econflow_core::reduced::{
    fit_closed_form, fit_cycle_parameters, integrate, seed_cycle_parameters, AnalyticSolution, ClosedFormFit,
    CycleParameters, FitOptions, FitReport, ReducedState,
};
use econflow_core::validation::{check_kinetic_run, check_moment_budgets, compare_hydro_vs_ode, ComparisonReport};
use econflow_core::{CouplingParams, DerivedRates};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{FileConfig, Mode, RunConfig};
use crate::error::CliError;
use crate::output;

/// What a run left on disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// For validate mode: whether every check passed.
    pub passed: Option<bool>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    mode: Mode,
    seed: u64,
    threads: usize,
    config: &'a FileConfig,
    derived: Option<Vec<DerivedRates>>,
    outputs: Vec<String>,
    summary: Value,
    wall_time_seconds: f64,
}

struct Artifacts<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl<'a> Artifacts<'a> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn names(&self) -> Vec<String> {
        self.files
            .iter()
            .map(|p| p.strip_prefix(self.dir).unwrap_or(p).display().to_string())
            .collect()
    }
}

/// Executes the configured mode, writing artifacts into `out_dir`.
///
/// The manifest is written even when validation fails; the failure is then
/// returned as [`CliError::Validation`].
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    let start = Instant::now();
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut art = Artifacts {
        dir: out_dir,
        files: Vec::new(),
    };
    let (summary, passed) = match cfg.mode {
        Mode::Kinetic => (kinetic(cfg, &mut art)?, None),
        Mode::Hydro => (hydro(cfg, &mut art)?, None),
        Mode::Ode => (ode(cfg, &mut art)?, None),
        Mode::Analytic => (analytic(cfg, &mut art)?, None),
        Mode::Validate => {
            let (s, pass) = validate(cfg, &mut art)?;
            (s, Some(pass))
        }
        Mode::Fit => (fit(cfg, &mut art)?, None),
    };
    let derived = cfg
        .file
        .coupling
        .as_ref()
        .map(|_| cfg.couplings())
        .transpose()?
        .map(|p| p.derived());
    let manifest_path = out_dir.join(&cfg.file.output.manifest);
    let manifest = Manifest {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        mode: cfg.mode,
        seed: cfg.file.seed,
        threads: rayon::current_num_threads(),
        config: &cfg.file,
        derived,
        outputs: art.names(),
        summary,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    output::write_json(&manifest_path, &manifest)?;
    art.files.push(manifest_path);
    if passed == Some(false) {
        return Err(CliError::Validation(format!(
            "see {}",
            out_dir.join(&cfg.file.output.report).display()
        )));
    }
    Ok(Outcome {
        files: art.files,
        passed,
    })
}

fn kinetic(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let (_, steps) = cfg.stepping()?;
    let grid = cfg.grid()?;
    let kc = cfg.kinetic()?;
    let series = run_kinetic(&kc, &grid, steps)?;
    let rows: Vec<_> = series.iter().map(|s| s.moments.clone()).collect();
    output::write_moments(&art.path(&cfg.file.output.moments), grid.risks(), &rows)?;
    let records: usize = series.iter().map(|s| s.records.len()).sum();
    if cfg.file.output.transactions {
        output::write_transactions(&art.path("transactions.csv"), series.iter().flat_map(|s| &s.records))?;
    }
    Ok(json!({ "steps": steps, "agents": kc.agent_count, "transactions": records }))
}

fn hydro_run(cfg: &RunConfig, snapshots: bool) -> Result<(HydroRun, CouplingParams, f64), CliError> {
    let (dt, steps) = cfg.stepping()?;
    let grid = cfg.grid()?;
    let g = cfg.grid_section()?;
    let params = cfg.couplings()?;
    let initial = cfg.initial_condition()?.build(&grid, g.epsilon_factor)?;
    let settings = HydroSettings::for_state(&initial, g.cfl_limit, g.epsilon_factor);
    let every = cfg.file.output.snapshot_every;
    let cadence = (snapshots && every > 0).then_some(every);
    let run = run_hydro(initial, &params, &settings, dt, steps, cadence)?;
    Ok((run, params, dt))
}

fn hydro_summary(run: &HydroRun) -> Value {
    let min_cl = run.moments.iter().map(|m| m.min_credit).fold(f64::INFINITY, f64::min);
    json!({
        "steps": run.moments.len() - 1,
        "peak_cfl": run.peak_cfl,
        "min_CL": min_cl,
        "final_time": run.final_state.time,
    })
}

fn hydro(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let (run, params, _) = hydro_run(cfg, true)?;
    output::write_moments(&art.path(&cfg.file.output.moments), params.risks(), &run.moments)?;
    if !run.snapshots.is_empty() {
        let dir = art.dir.join("snapshots");
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        for (k, state) in &run.snapshots {
            output::write_snapshot(&art.path(&format!("snapshots/step_{k:06}.csv")), state)?;
        }
    }
    Ok(hydro_summary(&run))
}

/// Explicit initial moments, or the moments of the Gaussian initial state.
fn reduced_initial(cfg: &RunConfig) -> Result<ReducedState, CliError> {
    if let Some(s) = cfg.initial_moments()? {
        return Ok(s);
    }
    let grid = cfg.grid()?;
    let g = cfg.grid_section()?;
    let state = cfg.initial_condition()?.build(&grid, g.epsilon_factor)?;
    let settings = HydroSettings::for_state(&state, g.cfl_limit, g.epsilon_factor);
    Ok(ReducedState::from_moments(&compute_moments(&state, &settings)?))
}

fn ode(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let (dt, steps) = cfg.stepping()?;
    let params = cfg.couplings()?;
    let initial = reduced_initial(cfg)?;
    let traj = integrate(&initial, &params, dt, steps)?;
    output::write_reduced(&art.path(&cfg.file.output.moments), params.risks(), &traj)?;
    Ok(json!({ "steps": steps, "integrator": "rk4" }))
}

fn analytic(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let (dt, steps) = cfg.stepping()?;
    let params = cfg.couplings()?;
    let initial = reduced_initial(cfg)?;
    let sol = AnalyticSolution::new(&params, &initial)?;
    let rows: Vec<ReducedState> = (0..=steps)
        .map(|k| sol.state_at(initial.time + k as f64 * dt))
        .collect();
    if let Some(bad) = rows.iter().position(|s| !s.is_finite()) {
        return Err(CliError::Numerical(econflow_core::Error::NumericalBlowup {
            field: "analytic".into(),
            cell: 0,
            time: rows[bad].time,
        }));
    }
    output::write_reduced(&art.path(&cfg.file.output.moments), params.risks(), &rows)?;
    Ok(json!({ "steps": steps }))
}

#[derive(Serialize)]
struct ValidationReport {
    pass: bool,
    peak_cfl: f64,
    budgets: ComparisonReport,
    tracking: ComparisonReport,
    kinetic: Option<ComparisonReport>,
}

fn validate(cfg: &RunConfig, art: &mut Artifacts) -> Result<(Value, bool), CliError> {
    let v = cfg.validate_section();
    let (run, params, dt) = hydro_run(cfg, false)?;
    output::write_moments(&art.path(&cfg.file.output.moments), params.risks(), &run.moments)?;
    let budgets = check_moment_budgets(&run.moments, &params, dt, v.pz_tolerance)?;
    let initial = ReducedState::from_moments(&run.moments[0]);
    let tracking = compare_hydro_vs_ode(&run.moments, &params, &initial, dt, v.tracking_tolerance)?;
    let kinetic = match cfg.file.kinetic {
        Some(_) => {
            let kc = cfg.kinetic()?;
            let (_, steps) = cfg.stepping()?;
            let series = run_kinetic(&kc, &cfg.grid()?, steps)?;
            Some(check_kinetic_run(&series, kc.dt)?)
        }
        None => None,
    };
    let pass = budgets.pass && tracking.pass && kinetic.as_ref().is_none_or(|k| k.pass);
    let failed: Vec<String> = [Some(&budgets), Some(&tracking), kinetic.as_ref()]
        .into_iter()
        .flatten()
        .flat_map(|r| r.failures().map(move |q| format!("{}/{}", r.name, q.name)))
        .collect();
    let report = ValidationReport {
        pass,
        peak_cfl: run.peak_cfl,
        budgets,
        tracking,
        kinetic,
    };
    output::write_json(&art.path(&cfg.file.output.report), &report)?;
    let mut summary = hydro_summary(&run);
    summary["pass"] = json!(pass);
    summary["failed"] = json!(failed);
    Ok((summary, pass))
}

#[derive(Serialize)]
struct FitOutput {
    input: String,
    column: String,
    points: usize,
    guess: CycleParameters,
    fit: FitReport,
    closed_form: Option<ClosedFormFit>,
}

fn fit(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let section = cfg.fit_section()?;
    let input = cfg.fit_input()?;
    let pairs = cfg.fit_pairs()?;
    let params = cfg.file.coupling.as_ref().map(|_| cfg.couplings()).transpose()?;
    let series = output::read_series(&input, &section.column)?;
    // Config checks guarantee rates with a matching axis count when no guess is given.
    let guess = match (cfg.fit_guess()?, &params) {
        (Some(g), _) => g,
        (None, Some(p)) => seed_cycle_parameters(&series, &p.derived())?,
        (None, None) => return Err(CliError::Config("fit.guess: required".into())),
    };
    let opts = FitOptions {
        max_iterations: section.max_iterations,
        ..FitOptions::default()
    };
    let report = fit_cycle_parameters(&series, pairs, &guess, &opts)?;
    let closed_form = params.map(|p| fit_closed_form(&series, &p.derived())).transpose()?;

    let header = ["time", "observed", "fitted", "residual"].map(String::from);
    let mut table = output::Table::create(&art.path(&cfg.file.output.moments), &header)?;
    for (&t, &y) in series.times().iter().zip(series.values()) {
        let f = report.parameters.eval(t);
        table.row([t, y, f, f - y])?;
    }
    table.finish()?;

    let summary = json!({
        "points": series.len(),
        "rmse": report.rmse,
        "converged": report.converged,
        "rank_deficient": report.rank_deficient,
    });
    let out = FitOutput {
        input: section.input.display().to_string(),
        column: section.column.clone(),
        points: series.len(),
        guess,
        fit: report,
        closed_form,
    };
    output::write_json(&art.path(&cfg.file.output.report), &out)?;
    Ok(summary)
}
