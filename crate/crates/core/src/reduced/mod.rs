//! Closed linear ODE system for the aggregate moments.
//!
//! ```text
//! C'  = a·Dz            LR' = b·Pz           MC' = C      ML' = LR
//! Px' = c_x·Dx          Dx' = d_x·Px         (y-side with c_y, d_y)
//! Pzx' = ECx + c_x·Dzx  Dzx' = ERx + d_x·Pzx (y-side likewise)
//! ECx' = μ_x·ERx        ERx' = η_x·ECx       (y-side likewise)
//! ```
//!
//! with `Pz = Σ_i (Pzx_i + Pzy_i)` and `Dz = Σ_i (Dzx_i + Dzy_i)`.

mod analytic;
mod fit;

use serde::{Deserialize, Serialize};

pub use analytic::{
    analytic_energies, analytic_impulses, analytic_pz_credit, AnalyticSolution, AxisImpulses, Basis, Signal,
};
pub use fit::{
    fit_closed_form, fit_cycle_parameters, seed_cycle_parameters, ClosedFormFit, CycleAxis, CycleParameters,
    FitOptions, FitReport, FitStatus, TimeSeries,
};

use crate::aggregate::AxisMoments;
use crate::error::{Error, Result};
use crate::hydro::MomentSet;
use crate::params::ReducedParams;

/// Number of non-axis entries: `C, LR, MC, ML`.
const HEAD: usize = 4;

/// Point on a reduced trajectory. Dimension `4 + 12n`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReducedState {
    pub time: f64,
    pub credit: f64,
    pub repayment: f64,
    pub cum_credit: f64,
    pub cum_repayment: f64,
    pub axes: Vec<AxisMoments>,
}

impl ReducedState {
    pub fn zeros(n: usize) -> Self {
        Self {
            axes: vec![AxisMoments::default(); n],
            ..Default::default()
        }
    }

    /// Seeds a reduced state from fluid moments, taking the prognostic energies.
    pub fn from_moments(m: &MomentSet) -> Self {
        Self {
            time: m.time,
            credit: m.credit,
            repayment: m.repayment,
            cum_credit: m.cum_credit,
            cum_repayment: m.cum_repayment,
            axes: m.axes.clone(),
        }
    }

    pub fn dimension(&self) -> usize {
        HEAD + AxisMoments::LEN * self.axes.len()
    }

    pub fn risks(&self) -> usize {
        self.axes.len()
    }

    pub fn pz(&self) -> f64 {
        self.axes.iter().map(|a| a.pzx + a.pzy).sum()
    }

    pub fn dz(&self) -> f64 {
        self.axes.iter().map(|a| a.dzx + a.dzy).sum()
    }

    /// Flat vector `[C, LR, MC, ML, axis_1.., axis_2.., ...]` (time excluded).
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dimension());
        v.extend([self.credit, self.repayment, self.cum_credit, self.cum_repayment]);
        for ax in &self.axes {
            v.extend(ax.to_array());
        }
        v
    }

    pub fn from_vector(time: f64, v: &[f64]) -> Result<Self> {
        if v.len() < HEAD || !(v.len() - HEAD).is_multiple_of(AxisMoments::LEN) {
            return Err(Error::invalid(format!(
                "reduced state vector has invalid length {}",
                v.len()
            )));
        }
        Ok(Self {
            time,
            credit: v[0],
            repayment: v[1],
            cum_credit: v[2],
            cum_repayment: v[3],
            axes: v[HEAD..]
                .chunks(AxisMoments::LEN)
                .map(AxisMoments::from_slice)
                .collect(),
        })
    }

    /// Column labels matching [`ReducedState::to_vector`].
    pub fn labels(n: usize) -> Vec<String> {
        let mut l: Vec<String> = ["C", "LR", "MC", "ML"].iter().map(|s| s.to_string()).collect();
        for i in 1..=n {
            l.extend(AxisMoments::labels(i));
        }
        l
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite() && self.to_vector().iter().all(|v| v.is_finite())
    }
}

fn rhs_into(s: &[f64], p: &ReducedParams, out: &mut [f64]) {
    let mut pz = 0.0;
    let mut dz = 0.0;
    for (i, ax) in p.axes.iter().enumerate() {
        let b = HEAD + AxisMoments::LEN * i;
        let [px, py, dx, dy, pzx, pzy, dzx, dzy, ecx, ecy, erx, ery] =
            <[f64; 12]>::try_from(&s[b..b + AxisMoments::LEN]).expect("axis block");
        pz += pzx + pzy;
        dz += dzx + dzy;
        out[b..b + AxisMoments::LEN].copy_from_slice(&[
            ax.c_x * dx,
            ax.c_y * dy,
            ax.d_x * px,
            ax.d_y * py,
            ecx + ax.c_x * dzx,
            ecy + ax.c_y * dzy,
            erx + ax.d_x * pzx,
            ery + ax.d_y * pzy,
            ax.mu_x * erx,
            ax.mu_y * ery,
            ax.eta_x * ecx,
            ax.eta_y * ecy,
        ]);
    }
    out[0] = p.a * dz;
    out[1] = p.b * pz;
    out[2] = s[0];
    out[3] = s[1];
}

fn check_dims(s: &ReducedState, p: &ReducedParams) -> Result<()> {
    if s.risks() != p.risks() {
        return Err(Error::invalid(format!(
            "state has {} axes but parameters have {}",
            s.risks(),
            p.risks()
        )));
    }
    Ok(())
}

/// Time derivative of `s`; the returned `time` field is `dt/dt = 1`.
pub fn ode_rhs(s: &ReducedState, p: &ReducedParams) -> Result<ReducedState> {
    check_dims(s, p)?;
    let v = s.to_vector();
    let mut out = vec![0.0; v.len()];
    rhs_into(&v, p, &mut out);
    ReducedState::from_vector(1.0, &out)
}

/// Classical fourth-order Runge–Kutta on flat vectors.
struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    fn step(&mut self, y: &mut [f64], p: &ReducedParams, dt: f64) {
        rhs_into(y, p, &mut self.k1);
        for (t, (y, k)) in self.tmp.iter_mut().zip(y.iter().zip(&self.k1)) {
            *t = y + 0.5 * dt * k;
        }
        rhs_into(&self.tmp, p, &mut self.k2);
        for (t, (y, k)) in self.tmp.iter_mut().zip(y.iter().zip(&self.k2)) {
            *t = y + 0.5 * dt * k;
        }
        rhs_into(&self.tmp, p, &mut self.k3);
        for (t, (y, k)) in self.tmp.iter_mut().zip(y.iter().zip(&self.k3)) {
            *t = y + dt * k;
        }
        rhs_into(&self.tmp, p, &mut self.k4);
        for (i, y) in y.iter_mut().enumerate() {
            *y += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

fn blowup(v: &[f64], time: f64) -> Result<()> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NumericalBlowup {
            field: "reduced state".into(),
            cell: i,
            time,
        });
    }
    Ok(())
}

/// One RK4 step.
pub fn rk4_step(s: &ReducedState, p: &ReducedParams, dt: f64) -> Result<ReducedState> {
    check_dt(dt)?;
    check_dims(s, p)?;
    let mut y = s.to_vector();
    Rk4::new(y.len()).step(&mut y, p, dt);
    let t = s.time + dt;
    blowup(&y, t)?;
    ReducedState::from_vector(t, &y)
}

/// Fixed-step RK4 trajectory of `steps` steps; the result includes the
/// initial state, so it has `steps + 1` entries.
pub fn integrate(initial: &ReducedState, p: &ReducedParams, dt: f64, steps: usize) -> Result<Vec<ReducedState>> {
    check_dt(dt)?;
    check_dims(initial, p)?;
    let mut y = initial.to_vector();
    let mut rk = Rk4::new(y.len());
    let mut out = Vec::with_capacity(steps + 1);
    out.push(initial.clone());
    for k in 1..=steps {
        rk.step(&mut y, p, dt);
        // time from the step count, not by accumulation
        let t = initial.time + k as f64 * dt;
        blowup(&y, t).map_err(|e| Error::AtStep {
            step: k,
            source: Box::new(e),
        })?;
        out.push(ReducedState::from_vector(t, &y)?);
    }
    Ok(out)
}

/// Quadratic invariants of one axis.
///
/// `impulse_* = d·P² − c·D²` and `energy_* = η·EC² − μ·ER²` are constant along
/// exact trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct AxisQuadratics {
    pub impulse_x: f64,
    pub impulse_y: f64,
    pub energy_x: f64,
    pub energy_y: f64,
}

pub fn conserved_quadratics(s: &ReducedState, p: &ReducedParams) -> Result<Vec<AxisQuadratics>> {
    check_dims(s, p)?;
    Ok(s.axes
        .iter()
        .zip(&p.axes)
        .map(|(m, c)| AxisQuadratics {
            impulse_x: c.d_x * m.px * m.px - c.c_x * m.dx * m.dx,
            impulse_y: c.d_y * m.py * m.py - c.c_y * m.dy * m.dy,
            energy_x: c.eta_x * m.ecx * m.ecx - c.mu_x * m.erx * m.erx,
            energy_y: c.eta_y * m.ecy * m.ecy - c.mu_y * m.ery * m.ery,
        })
        .collect())
}

/// Magnitudes of the terms entering each quadratic, `|d|·P² + |c|·D²` etc.
/// Used to normalize drift, since the energy invariant is indefinite.
pub fn quadratic_scales(s: &ReducedState, p: &ReducedParams) -> Result<Vec<AxisQuadratics>> {
    check_dims(s, p)?;
    Ok(s.axes
        .iter()
        .zip(&p.axes)
        .map(|(m, c)| AxisQuadratics {
            impulse_x: c.d_x.abs() * m.px * m.px + c.c_x.abs() * m.dx * m.dx,
            impulse_y: c.d_y.abs() * m.py * m.py + c.c_y.abs() * m.dy * m.dy,
            energy_x: c.eta_x.abs() * m.ecx * m.ecx + c.mu_x.abs() * m.erx * m.erx,
            energy_y: c.eta_y.abs() * m.ecy * m.ecy + c.mu_y.abs() * m.ery * m.ery,
        })
        .collect())
}
