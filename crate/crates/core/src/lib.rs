//! Credit-cycle dynamics on a bounded risk space, at three levels.
//!
//! - [`kinetic`]: agents with risk coordinates and velocities trade pairwise
//!   credit; transactions are binned into pair-space fields.
//! - [`hydro`]: Credit and Loan-Repayment "transaction fluids" on the
//!   `2n`-dimensional pair space `z = (x, y)`, evolved by a closed-box
//!   finite-volume scheme with linear cross-coupling sources.
//! - [`reduced`]: the closed linear ODE system for the fluid moments, with
//!   RK4 integration, closed-form solutions and cycle fitting.
//!
//! [`validation`] compares the levels against each other.

pub mod aggregate;
pub mod error;
pub mod grid;
pub mod hydro;
pub mod kinetic;
pub mod params;
pub mod reduced;
pub mod validation;

pub use error::{Error, Result};
pub use grid::{coordinate_moment, integrate_field, make_grid, EconomicDomain, GridSpec, ScalarField, VectorField};
pub use params::{AxisCoupling, CouplingParams, DerivedRates, ReducedParams};
