//! Cross-level consistency checks.
//!
//! - [`check_moment_budgets`]: per-step moment identities of a hydro run,
//!   recomputed from its emitted rows with forward differences.
//! - [`compare_hydro_vs_ode`]: hydro moments against the reduced ODE from the
//!   same initial moments.
//! - [`check_kinetic_aggregation`]: binned kinetic fields against raw
//!   transaction sums.
//!
//! Unless stated otherwise, a relative error is the largest absolute error over
//! the series divided by the largest magnitude of the reference over the series.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{integrate_field, ScalarField, VectorField};
use crate::hydro::MomentSet;
use crate::kinetic::{EParticle, KineticStep, TransactionRecord};
use crate::params::CouplingParams;
use crate::reduced::{integrate, ReducedState};

/// Reads one moment (by axis index) from a recorded step.
type Field = fn(&MomentSet, usize) -> f64;
type Getter = Box<dyn Fn(&ReducedState) -> f64>;

/// Tolerance of identities that hold exactly in the discrete scheme.
pub const EXACT_TOLERANCE: f64 = 1e-10;
/// Default tolerance of the first-order position-moment budgets.
pub const DEFAULT_PZ_TOLERANCE: f64 = 0.05;
/// Default hydro-vs-ODE tolerance on the exactly closed moments.
pub const DEFAULT_TRACKING_TOLERANCE: f64 = 0.005;
/// Tolerance of the kinetic aggregation identities.
pub const AGGREGATION_TOLERANCE: f64 = 1e-12;
/// Largest admissible mismatch between the hydro and ODE initial states.
pub const INITIAL_MATCH_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub cells_per_axis: Option<usize>,
    pub dt: f64,
    pub steps: usize,
}

/// Error statistics of one checked quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantityCheck {
    pub name: String,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub rmse: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl QuantityCheck {
    /// Statistics of `observed` against `reference`, relative to the peak
    /// reference magnitude.
    fn series(name: impl Into<String>, observed: &[f64], reference: &[f64], tolerance: f64) -> Self {
        let errs: Vec<f64> = observed.iter().zip(reference).map(|(o, r)| (o - r).abs()).collect();
        let scale = reference.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        Self::from_errors(name, &errs, scale, tolerance)
    }

    fn from_errors(name: impl Into<String>, errs: &[f64], scale: f64, tolerance: f64) -> Self {
        let max_abs_error = errs.iter().fold(0.0f64, |m, e| m.max(*e));
        let rmse = if errs.is_empty() {
            0.0
        } else {
            (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt()
        };
        Self::finish(name, max_abs_error, relative(max_abs_error, scale), rmse, tolerance)
    }

    fn finish(name: impl Into<String>, max_abs_error: f64, max_rel_error: f64, rmse: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            max_abs_error,
            max_rel_error,
            rmse,
            tolerance,
            // NaN errors fail
            pass: max_rel_error <= tolerance,
        }
    }
}

fn relative(err: f64, scale: f64) -> f64 {
    if err == 0.0 {
        0.0
    } else if scale > 0.0 {
        err / scale
    } else {
        f64::INFINITY
    }
}

/// One sample of the energy-closure drift between hydro and the ODE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosureDriftPoint {
    pub time: f64,
    /// `C_hydro − C_ode`
    pub credit: f64,
    /// `Pz_hydro − Pz_ode`
    pub pz: f64,
    /// `Dz_hydro − Dz_ode`
    pub dz: f64,
    /// Hydro `Σ |prognostic − diagnostic|` energy gap.
    pub energy_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub name: String,
    pub metadata: RunMetadata,
    pub quantities: Vec<QuantityCheck>,
    /// True when every quantity passes. Closure drift is never part of it.
    pub pass: bool,
    pub closure_drift: Vec<ClosureDriftPoint>,
}

impl ComparisonReport {
    fn new(name: &str, metadata: RunMetadata, quantities: Vec<QuantityCheck>) -> Self {
        Self {
            name: name.into(),
            pass: quantities.iter().all(|q| q.pass),
            metadata,
            quantities,
            closure_drift: Vec::new(),
        }
    }

    pub fn quantity(&self, name: &str) -> Option<&QuantityCheck> {
        self.quantities.iter().find(|q| q.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &QuantityCheck> {
        self.quantities.iter().filter(|q| !q.pass)
    }
}

fn check_series(series: &[MomentSet], params: &CouplingParams, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    if let Some(m) = series.iter().find(|m| m.axes.len() != params.risks()) {
        return Err(Error::invalid(format!(
            "moment row at t = {} has {} axes but parameters have {}",
            m.time,
            m.axes.len(),
            params.risks()
        )));
    }
    for w in series.windows(2) {
        let step = w[1].time - w[0].time;
        if (step - dt).abs() > 1e-9 * dt {
            return Err(Error::invalid(format!(
                "moment rows at t = {} and t = {} are not one step of {dt} apart",
                w[0].time, w[1].time
            )));
        }
    }
    Ok(())
}

/// Forward-difference budget: `(q(k+1) − q(k))/dt` against `rhs(k)`.
fn budget(
    name: String,
    series: &[MomentSet],
    dt: f64,
    tolerance: f64,
    q: impl Fn(&MomentSet) -> f64,
    rhs: impl Fn(&MomentSet) -> f64,
) -> QuantityCheck {
    let (lhs, rhs): (Vec<f64>, Vec<f64>) = series
        .windows(2)
        .map(|w| ((q(&w[1]) - q(&w[0])) / dt, rhs(&w[0])))
        .unzip();
    QuantityCheck::series(name, &lhs, &rhs, tolerance)
}

/// Verifies every per-step moment identity of a hydro run.
///
/// Exact identities (tolerance [`EXACT_TOLERANCE`]): `ΔC/dt = a·Dz`,
/// `ΔLR/dt = b·Pz`, `ΔMC/dt = C`, `ΔML/dt = LR`, `ΔP/dt = c·D`, `ΔD/dt = d·P`,
/// `ΔEC/dt = μ·ER`, `ΔER/dt = η·EC`, and zero boundary flux. First-order
/// identities (tolerance `pz_tolerance`): `ΔPz/dt = EC_diag + c·Dz` and
/// `ΔDz/dt = ER_diag + d·Pz`, with the diagnostic energies of the earlier row.
pub fn check_moment_budgets(
    series: &[MomentSet],
    params: &CouplingParams,
    dt: f64,
    pz_tolerance: f64,
) -> Result<ComparisonReport> {
    check_series(series, params, dt)?;
    let mut q = Vec::new();
    let (a, b) = (params.a, params.b);
    q.push(budget(
        "C".into(),
        series,
        dt,
        EXACT_TOLERANCE,
        |m| m.credit,
        |m| a * m.dz(),
    ));
    q.push(budget(
        "LR".into(),
        series,
        dt,
        EXACT_TOLERANCE,
        |m| m.repayment,
        |m| b * m.pz(),
    ));
    q.push(budget(
        "MC".into(),
        series,
        dt,
        EXACT_TOLERANCE,
        |m| m.cum_credit,
        |m| m.credit,
    ));
    q.push(budget(
        "ML".into(),
        series,
        dt,
        EXACT_TOLERANCE,
        |m| m.cum_repayment,
        |m| m.repayment,
    ));
    for (i, k) in params.axes.iter().enumerate() {
        let n = i + 1;
        let k = *k;
        let exact: [(&str, Field, f64, Field); 8] = [
            ("Px", |m, i| m.axes[i].px, k.c_x, |m, i| m.axes[i].dx),
            ("Py", |m, i| m.axes[i].py, k.c_y, |m, i| m.axes[i].dy),
            ("Dx", |m, i| m.axes[i].dx, k.d_x, |m, i| m.axes[i].px),
            ("Dy", |m, i| m.axes[i].dy, k.d_y, |m, i| m.axes[i].py),
            ("ECx", |m, i| m.axes[i].ecx, k.mu_x, |m, i| m.axes[i].erx),
            ("ECy", |m, i| m.axes[i].ecy, k.mu_y, |m, i| m.axes[i].ery),
            ("ERx", |m, i| m.axes[i].erx, k.eta_x, |m, i| m.axes[i].ecx),
            ("ERy", |m, i| m.axes[i].ery, k.eta_y, |m, i| m.axes[i].ecy),
        ];
        for (name, lhs, coef, src) in exact {
            q.push(budget(
                format!("{name}{n}"),
                series,
                dt,
                EXACT_TOLERANCE,
                |m| lhs(m, i),
                |m| coef * src(m, i),
            ));
        }
        let first_order: [(&str, Field, Field, f64, Field); 4] = [
            (
                "Pzx",
                |m, i| m.axes[i].pzx,
                |m, i| m.diagnostic_energies[i].ecx,
                k.c_x,
                |m, i| m.axes[i].dzx,
            ),
            (
                "Pzy",
                |m, i| m.axes[i].pzy,
                |m, i| m.diagnostic_energies[i].ecy,
                k.c_y,
                |m, i| m.axes[i].dzy,
            ),
            (
                "Dzx",
                |m, i| m.axes[i].dzx,
                |m, i| m.diagnostic_energies[i].erx,
                k.d_x,
                |m, i| m.axes[i].pzx,
            ),
            (
                "Dzy",
                |m, i| m.axes[i].dzy,
                |m, i| m.diagnostic_energies[i].ery,
                k.d_y,
                |m, i| m.axes[i].pzy,
            ),
        ];
        for (name, lhs, energy, coef, src) in first_order {
            q.push(budget(
                format!("{name}{n}"),
                series,
                dt,
                pz_tolerance,
                |m| lhs(m, i),
                |m| energy(m, i) + coef * src(m, i),
            ));
        }
    }
    let flux = series.iter().fold(0.0f64, |m, r| m.max(r.boundary_flux.abs()));
    q.push(QuantityCheck::finish("boundary_flux", flux, flux, flux, 0.0));
    let meta = RunMetadata {
        cells_per_axis: None,
        dt,
        steps: series.len().saturating_sub(1),
    };
    Ok(ComparisonReport::new("moment_budgets", meta, q))
}

/// Largest component-wise mismatch between two reduced states, each relative
/// to `max(1, |a|, |b|)`.
fn state_mismatch(a: &ReducedState, b: &ReducedState) -> Option<(usize, f64)> {
    a.to_vector()
        .iter()
        .zip(b.to_vector())
        .map(|(x, y)| (x - y).abs() / 1f64.max(x.abs()).max(y.abs()))
        .enumerate()
        .max_by(|l, r| l.1.total_cmp(&r.1))
}

/// Compares hydro moments with the RK4 reduced trajectory started from
/// `initial` at the same `dt`.
///
/// Checked against `tolerance`: `C`, `LR`, and per axis `P`, `D`, `EC`, `ER`.
/// `Pz`, `Dz` and the consequent `C` difference are reported in
/// `closure_drift` only.
pub fn compare_hydro_vs_ode(
    series: &[MomentSet],
    params: &CouplingParams,
    initial: &ReducedState,
    dt: f64,
    tolerance: f64,
) -> Result<ComparisonReport> {
    check_series(series, params, dt)?;
    let Some(first) = series.first() else {
        return Err(Error::invalid("hydro moment series is empty"));
    };
    if initial.risks() != params.risks() {
        return Err(Error::invalid(
            "reduced initial state and parameters have different dimensions",
        ));
    }
    let seeded = ReducedState::from_moments(first);
    if let Some((k, mis)) = state_mismatch(&seeded, initial) {
        if mis > INITIAL_MATCH_TOLERANCE {
            return Err(Error::invalid(format!(
                "reduced initial state differs from the hydro initial moments in {} by {mis:.3e}",
                ReducedState::labels(params.risks())[k]
            )));
        }
    }
    let ode = integrate(initial, params, dt, series.len() - 1)?;

    type Pick = fn(&ReducedState, usize) -> f64;
    let mut picks: Vec<(String, Getter)> = vec![
        ("C".into(), Box::new(|s: &ReducedState| s.credit)),
        ("LR".into(), Box::new(|s: &ReducedState| s.repayment)),
    ];
    let per_axis: [(&str, Pick); 8] = [
        ("Px", |s, i| s.axes[i].px),
        ("Py", |s, i| s.axes[i].py),
        ("Dx", |s, i| s.axes[i].dx),
        ("Dy", |s, i| s.axes[i].dy),
        ("ECx", |s, i| s.axes[i].ecx),
        ("ECy", |s, i| s.axes[i].ecy),
        ("ERx", |s, i| s.axes[i].erx),
        ("ERy", |s, i| s.axes[i].ery),
    ];
    for i in 0..params.risks() {
        for (name, f) in per_axis {
            picks.push((format!("{name}{}", i + 1), Box::new(move |s: &ReducedState| f(s, i))));
        }
    }
    let hydro: Vec<ReducedState> = series.iter().map(ReducedState::from_moments).collect();
    let quantities = picks
        .iter()
        .map(|(name, f)| {
            let obs: Vec<f64> = hydro.iter().map(f).collect();
            let reference: Vec<f64> = ode.iter().map(f).collect();
            QuantityCheck::series(name.clone(), &obs, &reference, tolerance)
        })
        .collect();
    let meta = RunMetadata {
        cells_per_axis: None,
        dt,
        steps: series.len() - 1,
    };
    let mut report = ComparisonReport::new("hydro_vs_ode", meta, quantities);
    report.closure_drift = series
        .iter()
        .zip(&ode)
        .map(|(h, o)| ClosureDriftPoint {
            time: h.time,
            credit: h.credit - o.credit,
            pz: h.pz() - o.pz(),
            dz: h.dz() - o.dz(),
            energy_gap: h.closure_drift,
        })
        .collect();
    Ok(report)
}

/// Binned fields of one kinetic step and the agents they were binned with.
#[derive(Debug, Clone, Copy)]
pub struct BinnedStep<'a> {
    pub agents: &'a [EParticle],
    pub credit: &'a ScalarField,
    pub impulse: &'a VectorField,
}

impl<'a> From<&'a KineticStep> for BinnedStep<'a> {
    fn from(s: &'a KineticStep) -> Self {
        Self {
            agents: &s.agents,
            credit: &s.credit,
            impulse: &s.impulse,
        }
    }
}

/// Per step, `∫ CL dz = Σ amount` and, per impulse component,
/// `∫ P dz = Σ amount·velocity` (creditor velocity on x-components, borrower
/// velocity on y-components). Relative errors are per step: the credit sum is
/// compared to `|Σ amount|`, impulses to `Σ |amount·velocity|` since signed
/// sums may cancel.
pub fn check_kinetic_aggregation(
    records: &[&[TransactionRecord]],
    fields: &[BinnedStep<'_>],
) -> Result<ComparisonReport> {
    if records.len() != fields.len() {
        return Err(Error::invalid(format!(
            "{} record batches but {} field snapshots",
            records.len(),
            fields.len()
        )));
    }
    let axes = fields.first().map_or(0, |f| f.impulse.len());
    let mut credit_err = Vec::with_capacity(fields.len());
    let mut credit_rel: f64 = 0.0;
    let mut imp_err = vec![Vec::with_capacity(fields.len()); axes];
    let mut imp_rel = vec![0.0f64; axes];
    for (recs, f) in records.iter().zip(fields) {
        if f.impulse.len() != axes {
            return Err(Error::invalid("impulse fields have inconsistent component counts"));
        }
        let n = axes / 2;
        let by_id: HashMap<usize, &[f64]> = f.agents.iter().map(|a| (a.id, a.velocity.as_slice())).collect();
        let velocity = |id: usize| -> Result<&[f64]> {
            by_id
                .get(&id)
                .copied()
                .ok_or_else(|| Error::invalid(format!("transaction references unknown agent {id}")))
        };
        let mut total = 0.0;
        let mut imp = vec![0.0; axes];
        let mut imp_abs = vec![0.0; axes];
        for r in recs.iter() {
            total += r.amount;
            let (vc, vb) = (velocity(r.creditor_id)?, velocity(r.borrower_id)?);
            for i in 0..n {
                let (x, y) = (r.amount * vc[i], r.amount * vb[i]);
                imp[i] += x;
                imp_abs[i] += x.abs();
                imp[n + i] += y;
                imp_abs[n + i] += y.abs();
            }
        }
        let e = (integrate_field(f.credit) - total).abs();
        credit_err.push(e);
        credit_rel = credit_rel.max(relative(e, total.abs()));
        for a in 0..axes {
            let e = (integrate_field(f.impulse.component(a)) - imp[a]).abs();
            imp_err[a].push(e);
            imp_rel[a] = imp_rel[a].max(relative(e, imp_abs[a]));
        }
    }
    let stats = |name: String, errs: &[f64], rel: f64| {
        let max_abs = errs.iter().fold(0.0f64, |m, e| m.max(*e));
        let rmse = if errs.is_empty() {
            0.0
        } else {
            (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt()
        };
        QuantityCheck::finish(name, max_abs, rel, rmse, AGGREGATION_TOLERANCE)
    };
    let mut q = vec![stats("integrated_credit".into(), &credit_err, credit_rel)];
    let n = axes / 2;
    for a in 0..axes {
        let side = if a < n { "x" } else { "y" };
        q.push(stats(format!("P{side}{}", a % n.max(1) + 1), &imp_err[a], imp_rel[a]));
    }
    let meta = RunMetadata {
        cells_per_axis: fields.first().map(|f| f.credit.grid().cells_per_axis()),
        dt: 0.0,
        steps: fields.len(),
    };
    Ok(ComparisonReport::new("kinetic_aggregation", meta, q))
}

/// [`check_kinetic_aggregation`] over the output of a kinetic run.
pub fn check_kinetic_run(steps: &[KineticStep], dt: f64) -> Result<ComparisonReport> {
    let records: Vec<&[TransactionRecord]> = steps.iter().map(|s| s.records.as_slice()).collect();
    let fields: Vec<BinnedStep<'_>> = steps.iter().map(BinnedStep::from).collect();
    let mut report = check_kinetic_aggregation(&records, &fields)?;
    report.metadata.dt = dt;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, EconomicDomain, GridSpec};
    use crate::hydro::{run_hydro, FluidState, GaussianBump, HydroSettings, InitialCondition, DEFAULT_EPSILON_FACTOR};
    use crate::kinetic::{bin_transactions, run_kinetic, KineticConfig, TransactionKernel, VelocityProcess};
    use crate::params::AxisCoupling;
    use std::sync::Arc;

    fn grid(m: usize) -> Arc<GridSpec> {
        Arc::new(make_grid(EconomicDomain::unit(1).unwrap(), m).unwrap())
    }

    fn params() -> CouplingParams {
        CouplingParams::new(
            1.0,
            0.8,
            vec![AxisCoupling {
                c_x: 0.5,
                d_x: -0.5,
                c_y: 0.6,
                d_y: -0.6,
                mu_x: 0.2,
                eta_x: 0.2,
                mu_y: 0.1,
                eta_y: 0.3,
            }],
        )
        .unwrap()
    }

    fn initial(g: &Arc<GridSpec>) -> FluidState {
        let bump = |mass: f64, velocity: Vec<f64>| GaussianBump {
            center: vec![0.5, 0.5],
            width: 0.1,
            mass,
            velocity,
            background: 5.0,
        };
        InitialCondition {
            credit: bump(1.0, vec![0.05, -0.04]),
            repayment: bump(1.2, vec![-0.03, 0.02]),
        }
        .build(g, DEFAULT_EPSILON_FACTOR)
        .unwrap()
    }

    fn hydro_series(m: usize, dt: f64, steps: usize, p: &CouplingParams) -> Vec<MomentSet> {
        let g = grid(m);
        let init = initial(&g);
        let st = HydroSettings::for_state(&init, 0.5, DEFAULT_EPSILON_FACTOR);
        run_hydro(init, p, &st, dt, steps, None).unwrap().moments
    }

    #[test]
    fn frozen_run_passes_trivially() {
        let g = grid(8);
        let mut init = FluidState::zeros(&g);
        init.credit = ScalarField::constant(&g, 1.0);
        let p = CouplingParams::frozen(1);
        let st = HydroSettings::for_state(&init, 0.5, DEFAULT_EPSILON_FACTOR);
        let m = run_hydro(init, &p, &st, 0.1, 10, None).unwrap().moments;
        let rep = check_moment_budgets(&m, &p, 0.1, DEFAULT_PZ_TOLERANCE).unwrap();
        assert!(rep.pass);
        assert!(rep
            .quantities
            .iter()
            .filter(|q| q.name != "MC")
            .all(|q| q.max_abs_error == 0.0));

        let ode = compare_hydro_vs_ode(
            &m,
            &p,
            &ReducedState::from_moments(&m[0]),
            0.1,
            DEFAULT_TRACKING_TOLERANCE,
        )
        .unwrap();
        assert!(ode.pass);
        assert!(ode.closure_drift.iter().all(|d| d.credit == 0.0 && d.pz == 0.0));
    }

    #[test]
    fn generic_run_exact_budgets() {
        let p = params();
        let m = hydro_series(32, 0.02, 200, &p);
        let rep = check_moment_budgets(&m, &p, 0.02, DEFAULT_PZ_TOLERANCE).unwrap();
        for q in &rep.quantities {
            if q.tolerance == EXACT_TOLERANCE || q.name == "boundary_flux" {
                assert!(q.pass, "{q:?}");
            }
        }
        assert_eq!(rep.metadata.steps, 200);
    }

    #[test]
    fn budgets_detect_tampering() {
        let p = params();
        let mut m = hydro_series(16, 0.02, 20, &p);
        m[10].axes[0].px += 1e-6;
        let rep = check_moment_budgets(&m, &p, 0.02, DEFAULT_PZ_TOLERANCE).unwrap();
        assert!(!rep.pass);
        assert!(!rep.quantity("Px1").unwrap().pass);
        assert!(rep.quantity("C").unwrap().pass);
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let p = params();
        let m = hydro_series(8, 0.02, 3, &p);
        assert!(check_moment_budgets(&m, &CouplingParams::frozen(2), 0.02, 0.05).is_err());
        assert!(check_moment_budgets(&m, &p, 0.03, 0.05).is_err());
        let mut off = ReducedState::from_moments(&m[0]);
        off.credit += 1e-6;
        let err = compare_hydro_vs_ode(&m, &p, &off, 0.02, 0.005).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(msg) if msg.contains('C')));
        assert!(compare_hydro_vs_ode(&[], &p, &off, 0.02, 0.005).is_err());
    }

    #[test]
    fn hydro_tracks_ode_on_exact_subsystem() {
        let p = params();
        let dt = 0.002;
        let m = hydro_series(32, dt, 500, &p);
        let rep = compare_hydro_vs_ode(
            &m,
            &p,
            &ReducedState::from_moments(&m[0]),
            dt,
            DEFAULT_TRACKING_TOLERANCE,
        )
        .unwrap();
        assert!(rep.pass, "{:?}", rep.failures().collect::<Vec<_>>());
        assert_eq!(rep.closure_drift.len(), 501);
    }

    #[test]
    fn kinetic_empty_and_single() {
        let rep = check_kinetic_aggregation(&[], &[]).unwrap();
        assert!(rep.pass);

        let g = grid(4);
        let agents = vec![
            EParticle {
                id: 0,
                position: vec![0.2],
                velocity: vec![0.1],
                cumulative_credits_issued: 0.0,
                cumulative_loans_received: 0.0,
            },
            EParticle {
                id: 1,
                position: vec![0.7],
                velocity: vec![-0.3],
                cumulative_credits_issued: 0.0,
                cumulative_loans_received: 0.0,
            },
        ];
        let recs = [TransactionRecord {
            creditor_id: 0,
            borrower_id: 1,
            amount: 7.0,
            time: 0.0,
        }];
        let (cl, p) = bin_transactions(&recs, &agents, &g).unwrap();
        assert_eq!(integrate_field(&cl), 7.0);
        let step = BinnedStep {
            agents: &agents,
            credit: &cl,
            impulse: &p,
        };
        let rep = check_kinetic_aggregation(&[&recs], &[step]).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.quantity("integrated_credit").unwrap().max_abs_error, 0.0);
        assert!(check_kinetic_aggregation(&[&recs, &recs], &[step]).is_err());
    }

    #[test]
    fn kinetic_run_aggregates() {
        let cfg = KineticConfig {
            agent_count: 200,
            seed: 11,
            dt: 0.1,
            velocity: VelocityProcess {
                theta: vec![1.0],
                sigma: vec![0.5],
            },
            kernel: TransactionKernel {
                rate: 0.2,
                amount_scale: 1.0,
                amount_shape: 0.7,
            },
        };
        let steps = run_kinetic(&cfg, &grid(16), 20).unwrap();
        let rep = check_kinetic_run(&steps, cfg.dt).unwrap();
        assert!(rep.pass, "{:?}", rep.quantities);
        assert_eq!(rep.quantities.len(), 3);
    }
}
