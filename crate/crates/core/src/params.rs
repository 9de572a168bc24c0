//! Linear coupling coefficients shared by the transaction-fluid solver and the
//! reduced moment system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients for one risk axis `i`.
///
/// `c_*`/`d_*` couple Credit and Loan-Repayment impulses, `mu_*`/`eta_*`
/// couple the Credit and Loan-Repayment energy factors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisCoupling {
    pub c_x: f64,
    pub c_y: f64,
    pub d_x: f64,
    pub d_y: f64,
    pub mu_x: f64,
    pub mu_y: f64,
    pub eta_x: f64,
    pub eta_y: f64,
}

impl AxisCoupling {
    /// Creditor-side impulse frequency `sqrt(-c_x d_x)`.
    pub fn omega(&self) -> f64 {
        (-self.c_x * self.d_x).sqrt()
    }

    /// Borrower-side impulse frequency `sqrt(-c_y d_y)`.
    pub fn nu(&self) -> f64 {
        (-self.c_y * self.d_y).sqrt()
    }

    /// Creditor-side energy rate `sqrt(mu_x eta_x)`.
    pub fn gamma_x(&self) -> f64 {
        (self.mu_x * self.eta_x).sqrt()
    }

    /// Borrower-side energy rate `sqrt(mu_y eta_y)`.
    pub fn gamma_y(&self) -> f64 {
        (self.mu_y * self.eta_y).sqrt()
    }

    fn check(&self, axis: usize) -> Result<()> {
        let i = axis + 1;
        let values = [
            self.c_x, self.c_y, self.d_x, self.d_y, self.mu_x, self.mu_y, self.eta_x, self.eta_y,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "axis {i}: coupling coefficients must be finite"
            )));
        }
        if self.c_x * self.d_x >= 0.0 {
            return Err(Error::invalid(format!(
                "axis {i}: c_x*d_x = {} must be negative so creditor impulses oscillate (omega^2 = -c_x*d_x > 0)",
                self.c_x * self.d_x
            )));
        }
        if self.c_y * self.d_y >= 0.0 {
            return Err(Error::invalid(format!(
                "axis {i}: c_y*d_y = {} must be negative so borrower impulses oscillate (nu^2 = -c_y*d_y > 0)",
                self.c_y * self.d_y
            )));
        }
        if self.mu_x * self.eta_x <= 0.0 {
            return Err(Error::invalid(format!(
                "axis {i}: mu_x*eta_x = {} must be positive (gamma_x^2 = mu_x*eta_x > 0)",
                self.mu_x * self.eta_x
            )));
        }
        if self.mu_y * self.eta_y <= 0.0 {
            return Err(Error::invalid(format!(
                "axis {i}: mu_y*eta_y = {} must be positive (gamma_y^2 = mu_y*eta_y > 0)",
                self.mu_y * self.eta_y
            )));
        }
        Ok(())
    }
}

/// Source coefficients of the coupled Credit / Loan-Repayment system.
///
/// `a` scales the Credit source `a z·D`, `b` the Loan-Repayment source `b z·P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub a: f64,
    pub b: f64,
    pub axes: Vec<AxisCoupling>,
}

/// The reduced system uses the same coefficient set.
pub type ReducedParams = CouplingParams;

/// Frequencies and rates derived from the couplings of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedRates {
    pub omega: f64,
    pub nu: f64,
    pub gamma_x: f64,
    pub gamma_y: f64,
}

impl CouplingParams {
    /// Validated constructor enforcing the oscillation and growth sign constraints.
    pub fn new(a: f64, b: f64, axes: Vec<AxisCoupling>) -> Result<Self> {
        let p = Self::unchecked(a, b, axes);
        p.validate()?;
        Ok(p)
    }

    /// Builds without sign checks. Zero couplings (frozen dynamics) are only
    /// reachable this way.
    pub fn unchecked(a: f64, b: f64, axes: Vec<AxisCoupling>) -> Self {
        Self { a, b, axes }
    }

    /// All coefficients zero for `n` axes.
    pub fn frozen(n: usize) -> Self {
        Self::unchecked(0.0, 0.0, vec![AxisCoupling::default(); n])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::invalid("a and b must be finite"));
        }
        if self.axes.is_empty() {
            return Err(Error::invalid("at least one axis of couplings is required"));
        }
        self.axes.iter().enumerate().try_for_each(|(i, ax)| ax.check(i))
    }

    pub fn risks(&self) -> usize {
        self.axes.len()
    }

    pub fn derived(&self) -> Vec<DerivedRates> {
        self.axes
            .iter()
            .map(|ax| DerivedRates {
                omega: ax.omega(),
                nu: ax.nu(),
                gamma_x: ax.gamma_x(),
                gamma_y: ax.gamma_y(),
            })
            .collect()
    }
}
