//! Finite-volume solver for the coupled Credit / Loan-Repayment transaction fluid.
//!
//! State per cell: Credit density `CL` with impulse `P = v·CL`, Loan-Repayment
//! density `LR` with impulse `D = u·LR`, and per-axis energy fields `EC`, `ER`.
//! A step transports every Credit-side field with `v` and every
//! Loan-Repayment-side field with `u`, then adds the linear cross-coupling
//! sources evaluated on the pre-step state:
//!
//! ```text
//! CL  += dt·a·(z·D)          LR  += dt·b·(z·P)
//! Px_i += dt·c_xi·Dx_i       Dx_i += dt·d_xi·Px_i     (and y-side)
//! ECx_i += dt·μ_xi·ERx_i     ERx_i += dt·η_xi·ECx_i   (and y-side)
//! ```

mod advection;
mod initial;
mod moments;

use std::sync::Arc;

pub use advection::{advect_upwind, boundary_flux, cfl_number, derive_velocity};
pub use initial::{GaussianBump, InitialCondition};
pub use moments::{compute_moments, MomentSet};

use crate::error::{Error, Result};
use crate::grid::{integrate_field, GridSpec, ScalarField, VectorField};
use crate::params::{AxisCoupling, CouplingParams};

/// Default ceiling on the CFL number of a step.
pub const DEFAULT_CFL_LIMIT: f64 = 0.5;
/// Default regularization relative to the initial peak density.
pub const DEFAULT_EPSILON_FACTOR: f64 = 1e-8;

/// Complete transaction-fluid state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub time: f64,
    /// `CL(t, z)`
    pub credit: ScalarField,
    /// `LR(t, z)`
    pub repayment: ScalarField,
    /// `P(t, z)`, components `x_1..x_n, y_1..y_n`
    pub credit_impulse: VectorField,
    /// `D(t, z)`
    pub repayment_impulse: VectorField,
    /// `ECx_1..ECx_n, ECy_1..ECy_n`
    pub credit_energy: VectorField,
    /// `ERx_1..ERx_n, ERy_1..ERy_n`
    pub repayment_energy: VectorField,
    /// Cumulative Credits `MC(t)`.
    pub cum_credit: f64,
    /// Cumulative Loan-Repayments `ML(t)`.
    pub cum_repayment: f64,
}

impl FluidState {
    pub fn zeros(grid: &Arc<GridSpec>) -> Self {
        Self {
            time: 0.0,
            credit: ScalarField::zeros(grid),
            repayment: ScalarField::zeros(grid),
            credit_impulse: VectorField::zeros(grid),
            repayment_impulse: VectorField::zeros(grid),
            credit_energy: VectorField::zeros(grid),
            repayment_energy: VectorField::zeros(grid),
            cum_credit: 0.0,
            cum_repayment: 0.0,
        }
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        self.credit.grid()
    }

    fn fields(&self) -> impl Iterator<Item = (String, &ScalarField)> {
        let vec_fields = [
            ("P", &self.credit_impulse),
            ("D", &self.repayment_impulse),
            ("EC", &self.credit_energy),
            ("ER", &self.repayment_energy),
        ];
        [("CL".to_string(), &self.credit), ("LR".to_string(), &self.repayment)]
            .into_iter()
            .chain(vec_fields.into_iter().flat_map(|(name, vf)| {
                vf.components()
                    .iter()
                    .enumerate()
                    .map(move |(a, f)| (format!("{name}[{a}]"), f))
            }))
    }

    /// Checks that every field sits on one grid with the right component count.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid();
        for (name, f) in self.fields() {
            if f.grid() != grid {
                return Err(Error::invalid(format!("field {name} is on a different grid")));
            }
            if let Some(cell) = f.first_non_finite() {
                return Err(Error::invalid(format!("field {name} is non-finite at cell {cell}")));
            }
        }
        let axes = grid.axes();
        for vf in [
            &self.credit_impulse,
            &self.repayment_impulse,
            &self.credit_energy,
            &self.repayment_energy,
        ] {
            if vf.len() != axes {
                return Err(Error::invalid(format!(
                    "vector field has {} components, expected {axes}",
                    vf.len()
                )));
            }
        }
        Ok(())
    }
}

/// Numerical settings of the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HydroSettings {
    pub cfl_limit: f64,
    /// Regularization for the Credit velocity `v`.
    pub credit_epsilon: f64,
    /// Regularization for the Loan-Repayment velocity `u`.
    pub repayment_epsilon: f64,
}

impl HydroSettings {
    /// Epsilons scaled by the peak densities of `state`.
    pub fn for_state(state: &FluidState, cfl_limit: f64, epsilon_factor: f64) -> Self {
        Self {
            cfl_limit,
            credit_epsilon: scaled_epsilon(&state.credit, epsilon_factor),
            repayment_epsilon: scaled_epsilon(&state.repayment, epsilon_factor),
        }
    }

    pub fn velocities(&self, state: &FluidState) -> Result<(VectorField, VectorField)> {
        Ok((
            derive_velocity(&state.credit, &state.credit_impulse, self.credit_epsilon)?,
            derive_velocity(&state.repayment, &state.repayment_impulse, self.repayment_epsilon)?,
        ))
    }
}

pub(crate) fn scaled_epsilon(density: &ScalarField, factor: f64) -> f64 {
    let peak = density.max_abs();
    if peak > 0.0 {
        factor * peak
    } else {
        factor
    }
}

/// Per-component coupling lookups for the `2n` ordered components.
struct ComponentCoefficients {
    c: Vec<f64>,
    d: Vec<f64>,
    mu: Vec<f64>,
    eta: Vec<f64>,
}

impl ComponentCoefficients {
    fn new(params: &CouplingParams) -> Self {
        let pick = |fx: fn(&AxisCoupling) -> f64, fy: fn(&AxisCoupling) -> f64| -> Vec<f64> {
            params.axes.iter().map(fx).chain(params.axes.iter().map(fy)).collect()
        };
        Self {
            c: pick(|a| a.c_x, |a| a.c_y),
            d: pick(|a| a.d_x, |a| a.d_y),
            mu: pick(|a| a.mu_x, |a| a.mu_y),
            eta: pick(|a| a.eta_x, |a| a.eta_y),
        }
    }
}

/// Applies `target += dt·coef·source` cellwise.
fn add_source(target: &mut ScalarField, source: &ScalarField, factor: f64) {
    if factor == 0.0 {
        return;
    }
    for (t, s) in target.values_mut().iter_mut().zip(source.values()) {
        *t += factor * s;
    }
}

/// Cellwise `z·F = Σ_a z_a F_a`.
fn position_dot(field: &VectorField) -> Vec<f64> {
    let grid = field.grid();
    (0..grid.cell_count())
        .map(|c| {
            field
                .components()
                .iter()
                .enumerate()
                .map(|(a, f)| grid.coordinate(c, a) * f.values()[c])
                .sum()
        })
        .collect()
}

/// Advances the fluid by one explicit step.
pub fn step_system(
    state: &FluidState,
    params: &CouplingParams,
    settings: &HydroSettings,
    dt: f64,
) -> Result<FluidState> {
    advance(state, params, settings, dt).map(|(next, _)| next)
}

/// [`step_system`] that also returns the CFL number of the step.
fn advance(
    state: &FluidState,
    params: &CouplingParams,
    settings: &HydroSettings,
    dt: f64,
) -> Result<(FluidState, f64)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    let grid = state.grid();
    if params.risks() != grid.risks() {
        return Err(Error::invalid(format!(
            "couplings given for {} axes but the grid has {} risks",
            params.risks(),
            grid.risks()
        )));
    }
    let (v, u) = settings.velocities(state)?;
    let cfl = cfl_number(&v, dt).max(cfl_number(&u, dt));
    if cfl > settings.cfl_limit {
        return Err(Error::CflViolation {
            cfl,
            limit: settings.cfl_limit,
        });
    }

    let advect_all = |vf: &VectorField, vel: &VectorField| -> VectorField {
        let comps = vf
            .components()
            .iter()
            .map(|f| advection::advect_unchecked(f, vel, dt))
            .collect();
        VectorField::from_components(comps).expect("component count preserved")
    };

    let mut credit = advection::advect_unchecked(&state.credit, &v, dt);
    let mut repayment = advection::advect_unchecked(&state.repayment, &u, dt);
    let mut credit_impulse = advect_all(&state.credit_impulse, &v);
    let mut repayment_impulse = advect_all(&state.repayment_impulse, &u);
    let mut credit_energy = advect_all(&state.credit_energy, &v);
    let mut repayment_energy = advect_all(&state.repayment_energy, &u);

    if params.a != 0.0 {
        let zd = position_dot(&state.repayment_impulse);
        for (t, s) in credit.values_mut().iter_mut().zip(&zd) {
            *t += dt * params.a * s;
        }
    }
    if params.b != 0.0 {
        let zp = position_dot(&state.credit_impulse);
        for (t, s) in repayment.values_mut().iter_mut().zip(&zp) {
            *t += dt * params.b * s;
        }
    }

    let k = ComponentCoefficients::new(params);
    for comp in 0..grid.axes() {
        add_source(
            credit_impulse.component_mut(comp),
            state.repayment_impulse.component(comp),
            dt * k.c[comp],
        );
        add_source(
            repayment_impulse.component_mut(comp),
            state.credit_impulse.component(comp),
            dt * k.d[comp],
        );
        add_source(
            credit_energy.component_mut(comp),
            state.repayment_energy.component(comp),
            dt * k.mu[comp],
        );
        add_source(
            repayment_energy.component_mut(comp),
            state.credit_energy.component(comp),
            dt * k.eta[comp],
        );
    }

    let next = FluidState {
        time: state.time + dt,
        credit,
        repayment,
        credit_impulse,
        repayment_impulse,
        credit_energy,
        repayment_energy,
        cum_credit: state.cum_credit + dt * integrate_field(&state.credit),
        cum_repayment: state.cum_repayment + dt * integrate_field(&state.repayment),
    };
    for (name, f) in next.fields() {
        if let Some(cell) = f.first_non_finite() {
            return Err(Error::NumericalBlowup {
                field: name,
                cell,
                time: next.time,
            });
        }
    }
    Ok((next, cfl))
}

/// Moment rows (and optional snapshots) from a hydro run.
#[derive(Debug, Clone)]
pub struct HydroRun {
    /// One row per emitted state, starting with the initial state.
    pub moments: Vec<MomentSet>,
    /// `(step index, state)` pairs at the requested cadence.
    pub snapshots: Vec<(usize, FluidState)>,
    pub final_state: FluidState,
    /// Largest CFL number over all steps taken.
    pub peak_cfl: f64,
}

/// Runs `steps` steps, emitting moments after each.
///
/// With `snapshot_every = Some(k)` the state is also kept every `k` steps
/// (including step 0).
pub fn run_hydro(
    initial: FluidState,
    params: &CouplingParams,
    settings: &HydroSettings,
    dt: f64,
    steps: usize,
    snapshot_every: Option<usize>,
) -> Result<HydroRun> {
    initial.validate()?;
    let keep = |k: usize| matches!(snapshot_every, Some(e) if e > 0 && k.is_multiple_of(e));
    let mut moments = Vec::with_capacity(steps + 1);
    let mut snapshots = Vec::new();
    moments.push(compute_moments(&initial, settings)?);
    if keep(0) {
        snapshots.push((0, initial.clone()));
    }
    let mut state = initial;
    let mut peak_cfl = 0.0f64;
    for k in 1..=steps {
        let (next, cfl) = advance(&state, params, settings, dt).map_err(|e| Error::AtStep {
            step: k,
            source: Box::new(e),
        })?;
        state = next;
        peak_cfl = peak_cfl.max(cfl);
        moments.push(compute_moments(&state, settings)?);
        if keep(k) {
            snapshots.push((k, state.clone()));
        }
    }
    Ok(HydroRun {
        moments,
        snapshots,
        final_state: state,
        peak_cfl,
    })
}
