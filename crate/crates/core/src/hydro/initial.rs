//! Gaussian initial data for the transaction fluid.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{derive_velocity, scaled_epsilon, FluidState};
use crate::error::{Error, Result};
use crate::grid::{integrate_field, GridSpec, ScalarField, VectorField};

/// Isotropic Gaussian density moving with a uniform bulk velocity, over an
/// optional resting background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    /// Center in pair space, `2n` coordinates.
    pub center: Vec<f64>,
    pub width: f64,
    /// Integral of the discretized density.
    pub mass: f64,
    /// Bulk velocity, `2n` components.
    pub velocity: Vec<f64>,
    /// Uniform density added on top of the bump; it carries no impulse.
    #[serde(default)]
    pub background: f64,
}

impl GaussianBump {
    fn check(&self, grid: &GridSpec, what: &str) -> Result<()> {
        let axes = grid.axes();
        if self.center.len() != axes || self.velocity.len() != axes {
            return Err(Error::invalid(format!(
                "{what}: center and velocity need {axes} components"
            )));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::invalid(format!("{what}: width must be positive")));
        }
        if !(self.background >= 0.0 && self.background.is_finite()) {
            return Err(Error::invalid(format!("{what}: background must be nonnegative")));
        }
        if !self.mass.is_finite() || self.center.iter().chain(&self.velocity).any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("{what}: values must be finite")));
        }
        Ok(())
    }

    /// Normalized bump alone, without the background.
    fn bump(&self, grid: &Arc<GridSpec>) -> ScalarField {
        let two_w2 = 2.0 * self.width * self.width;
        let mut f = ScalarField::from_fn(grid, |z| {
            let r2: f64 = z.iter().zip(&self.center).map(|(a, b)| (a - b).powi(2)).sum();
            (-r2 / two_w2).exp()
        });
        let raw = integrate_field(&f);
        if raw > 0.0 {
            let scale = self.mass / raw;
            f.values_mut().iter_mut().for_each(|v| *v *= scale);
        }
        f
    }

    fn density(&self, bump: &ScalarField) -> ScalarField {
        let vals = bump.values().iter().map(|r| r + self.background).collect();
        ScalarField::from_raw(bump.grid(), vals)
    }

    fn impulse(&self, bump: &ScalarField) -> VectorField {
        let comps = self
            .velocity
            .iter()
            .map(|vel| ScalarField::from_raw(bump.grid(), bump.values().iter().map(|r| vel * r).collect()))
            .collect();
        VectorField::from_components(comps).expect("2n components")
    }
}

/// Initial Credit and Loan-Repayment bumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub credit: GaussianBump,
    pub repayment: GaussianBump,
}

fn energy_fields(density: &ScalarField, impulse: &VectorField, epsilon: f64) -> Result<VectorField> {
    let vel = derive_velocity(density, impulse, epsilon)?;
    let comps = vel
        .components()
        .iter()
        .map(|va| {
            let vals = va
                .values()
                .iter()
                .zip(density.values())
                .map(|(w, r)| w * w * r)
                .collect();
            ScalarField::from_raw(density.grid(), vals)
        })
        .collect();
    VectorField::from_components(comps)
}

impl InitialCondition {
    /// Builds the state; energy fields start at their diagnostic values `v_a² CL`, `u_a² LR`.
    pub fn build(&self, grid: &Arc<GridSpec>, epsilon_factor: f64) -> Result<FluidState> {
        self.credit.check(grid, "credit bump")?;
        self.repayment.check(grid, "repayment bump")?;
        let credit_bump = self.credit.bump(grid);
        let repayment_bump = self.repayment.bump(grid);
        let credit = self.credit.density(&credit_bump);
        let repayment = self.repayment.density(&repayment_bump);
        let credit_impulse = self.credit.impulse(&credit_bump);
        let repayment_impulse = self.repayment.impulse(&repayment_bump);
        let credit_energy = energy_fields(&credit, &credit_impulse, scaled_epsilon(&credit, epsilon_factor))?;
        let repayment_energy = energy_fields(
            &repayment,
            &repayment_impulse,
            scaled_epsilon(&repayment, epsilon_factor),
        )?;
        Ok(FluidState {
            time: 0.0,
            credit,
            repayment,
            credit_impulse,
            repayment_impulse,
            credit_energy,
            repayment_energy,
            cum_credit: 0.0,
            cum_repayment: 0.0,
        })
    }
}
