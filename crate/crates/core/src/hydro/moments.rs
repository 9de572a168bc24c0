//! Integral moments of a fluid state.

use serde::{Deserialize, Serialize};

use super::advection::boundary_flux;
use super::{FluidState, HydroSettings};
use crate::aggregate::{AxisEnergies, AxisMoments};
use crate::error::Result;
use crate::grid::{compensated_sum, coordinate_moment, integrate_field};

/// Every integral extracted from a [`FluidState`] at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub time: f64,
    /// Total Credits `C = ∫ CL dz`.
    pub credit: f64,
    /// Total Loan-Repayments `∫ LR dz`.
    pub repayment: f64,
    pub cum_credit: f64,
    pub cum_repayment: f64,
    /// Impulses, position moments and prognostic energies per axis.
    pub axes: Vec<AxisMoments>,
    /// `∫ v_a² CL dz` and `∫ u_a² LR dz` per axis.
    pub diagnostic_energies: Vec<AxisEnergies>,
    /// Credit mean risk `X_C`; `None` when `C = 0`.
    pub credit_mean_risk: Option<Vec<f64>>,
    /// Loan mean risk `X_L`; `None` when `C = 0`.
    pub loan_mean_risk: Option<Vec<f64>>,
    pub boundary_flux: f64,
    pub min_credit: f64,
    /// `Σ |prognostic − diagnostic|` over all energy components.
    pub closure_drift: f64,
}

impl MomentSet {
    /// `Pz = Σ_i (Pzx_i + Pzy_i)`.
    pub fn pz(&self) -> f64 {
        self.axes.iter().map(|a| a.pzx + a.pzy).sum()
    }

    /// `Dz = Σ_i (Dzx_i + Dzy_i)`.
    pub fn dz(&self) -> f64 {
        self.axes.iter().map(|a| a.dzx + a.dzy).sum()
    }

    /// `∫ x_i CL dz` per axis, i.e. `C·X_C`; zero vector when `C = 0`.
    pub fn credit_position(&self) -> Vec<f64> {
        match &self.credit_mean_risk {
            Some(x) => x.iter().map(|xi| xi * self.credit).collect(),
            None => vec![0.0; self.axes.len()],
        }
    }
}

/// Extracts all moments of `state`.
pub fn compute_moments(state: &FluidState, settings: &HydroSettings) -> Result<MomentSet> {
    let grid = state.grid();
    let n = grid.risks();
    let (v, u) = settings.velocities(state)?;

    let integral = |vf: &crate::grid::VectorField, a: usize| integrate_field(vf.component(a));
    let weighted = |vf: &crate::grid::VectorField, a: usize| coordinate_moment(vf.component(a), a);
    let energy = |vel: &crate::grid::VectorField, rho: &crate::grid::ScalarField, a: usize| {
        let s = compensated_sum(
            vel.component(a)
                .values()
                .iter()
                .zip(rho.values())
                .map(|(w, r)| w * w * r),
        );
        s * grid.cell_measure()
    };

    let mut axes = Vec::with_capacity(n);
    let mut diagnostic = Vec::with_capacity(n);
    for i in 0..n {
        let (xa, ya) = (i, n + i);
        axes.push(AxisMoments {
            px: integral(&state.credit_impulse, xa),
            py: integral(&state.credit_impulse, ya),
            dx: integral(&state.repayment_impulse, xa),
            dy: integral(&state.repayment_impulse, ya),
            pzx: weighted(&state.credit_impulse, xa)?,
            pzy: weighted(&state.credit_impulse, ya)?,
            dzx: weighted(&state.repayment_impulse, xa)?,
            dzy: weighted(&state.repayment_impulse, ya)?,
            ecx: integral(&state.credit_energy, xa),
            ecy: integral(&state.credit_energy, ya),
            erx: integral(&state.repayment_energy, xa),
            ery: integral(&state.repayment_energy, ya),
        });
        diagnostic.push(AxisEnergies {
            ecx: energy(&v, &state.credit, xa),
            ecy: energy(&v, &state.credit, ya),
            erx: energy(&u, &state.repayment, xa),
            ery: energy(&u, &state.repayment, ya),
        });
    }

    let credit = integrate_field(&state.credit);
    let (credit_mean_risk, loan_mean_risk) = if credit != 0.0 {
        let xc = (0..n)
            .map(|i| coordinate_moment(&state.credit, i).map(|m| m / credit))
            .collect::<Result<Vec<_>>>()?;
        let xl = (0..n)
            .map(|i| coordinate_moment(&state.credit, n + i).map(|m| m / credit))
            .collect::<Result<Vec<_>>>()?;
        (Some(xc), Some(xl))
    } else {
        (None, None)
    };

    let closure_drift = axes
        .iter()
        .zip(&diagnostic)
        .map(|(p, d)| (p.ecx - d.ecx).abs() + (p.ecy - d.ecy).abs() + (p.erx - d.erx).abs() + (p.ery - d.ery).abs())
        .sum();

    Ok(MomentSet {
        time: state.time,
        credit,
        repayment: integrate_field(&state.repayment),
        cum_credit: state.cum_credit,
        cum_repayment: state.cum_repayment,
        axes,
        diagnostic_energies: diagnostic,
        credit_mean_risk,
        loan_mean_risk,
        boundary_flux: boundary_flux(&state.credit, &v),
        min_credit: state.credit.min(),
        closure_drift,
    })
}
