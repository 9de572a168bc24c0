//! Closed-form solutions of the reduced system.
//!
//! Every component is a finite sum of `t^k`, `cos ωt`, `sin ωt` and `e^{λt}`
//! terms, represented by [`Signal`]. Impulses are free harmonic oscillators,
//! energies are sums of `e^{±γt}` modes, the position moments `Pz`, `Dz` are
//! oscillators forced by the energy modes, and the totals follow by term-wise
//! integration.

use serde::Serialize;

use super::ReducedState;
use crate::aggregate::{AxisEnergies, AxisMoments};
use crate::error::{Error, Result};
use crate::params::ReducedParams;

/// One basis function of time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Basis {
    /// `t^k`
    Power(u32),
    Cos(f64),
    Sin(f64),
    Exp(f64),
}

impl Basis {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Basis::Power(0) => 1.0,
            Basis::Power(k) => t.powi(k as i32),
            Basis::Cos(w) => (w * t).cos(),
            Basis::Sin(w) => (w * t).sin(),
            Basis::Exp(r) => (r * t).exp(),
        }
    }
}

/// Linear combination of basis functions.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Signal {
    terms: Vec<(f64, Basis)>,
}

impl Signal {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::zero().with(c, Basis::Power(0))
    }

    pub fn with(mut self, coef: f64, basis: Basis) -> Self {
        if coef != 0.0 {
            self.terms.push((coef, basis));
        }
        self
    }

    pub fn terms(&self) -> &[(f64, Basis)] {
        &self.terms
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|(c, b)| c * b.eval(t)).sum()
    }

    pub fn scaled(&self, k: f64) -> Signal {
        Signal {
            terms: self
                .terms
                .iter()
                .map(|&(c, b)| (c * k, b))
                .filter(|(c, _)| *c != 0.0)
                .collect(),
        }
    }

    pub fn plus(mut self, other: &Signal) -> Signal {
        self.terms.extend_from_slice(&other.terms);
        self
    }

    /// `∫_0^t self(s) ds`. Zero frequencies and rates are not expected.
    pub fn integral(&self) -> Signal {
        let mut out = Signal::zero();
        for &(c, b) in &self.terms {
            out = match b {
                Basis::Power(k) => out.with(c / (k + 1) as f64, Basis::Power(k + 1)),
                Basis::Cos(w) => out.with(c / w, Basis::Sin(w)),
                Basis::Sin(w) => out.with(c / w, Basis::Power(0)).with(-c / w, Basis::Cos(w)),
                Basis::Exp(r) => out.with(c / r, Basis::Exp(r)).with(-c / r, Basis::Power(0)),
            };
        }
        out
    }
}

/// Free oscillator `P' = c·D`, `D' = d·P` with `c·d < 0`.
fn oscillator(c: f64, d: f64, p0: f64, d0: f64) -> (Signal, Signal) {
    let w = (-c * d).sqrt();
    let p = Signal::zero().with(p0, Basis::Cos(w)).with(c * d0 / w, Basis::Sin(w));
    let q = Signal::zero().with(d0, Basis::Cos(w)).with(d * p0 / w, Basis::Sin(w));
    (p, q)
}

/// `e^{+γt}` and `e^{−γt}` amplitudes of the pair `E' = μR`, `R' = ηE`.
#[derive(Debug, Clone, Copy)]
struct EnergyModes {
    gamma: f64,
    e_plus: f64,
    e_minus: f64,
    r_plus: f64,
    r_minus: f64,
}

impl EnergyModes {
    fn new(mu: f64, eta: f64, e0: f64, r0: f64) -> Self {
        let gamma = (mu * eta).sqrt();
        Self {
            gamma,
            e_plus: 0.5 * (e0 + mu * r0 / gamma),
            e_minus: 0.5 * (e0 - mu * r0 / gamma),
            r_plus: 0.5 * (r0 + eta * e0 / gamma),
            r_minus: 0.5 * (r0 - eta * e0 / gamma),
        }
    }

    fn signals(&self) -> (Signal, Signal) {
        let g = self.gamma;
        (
            Signal::zero()
                .with(self.e_plus, Basis::Exp(g))
                .with(self.e_minus, Basis::Exp(-g)),
            Signal::zero()
                .with(self.r_plus, Basis::Exp(g))
                .with(self.r_minus, Basis::Exp(-g)),
        )
    }
}

/// Position moments `Pz' = E + c·Dz`, `Dz' = R + d·Pz` driven by energy modes.
///
/// The particular part for a mode `e^{λt}` has amplitudes
/// `A = (λE_λ + c R_λ)/(λ² + ω²)`, `B = (λR_λ + d E_λ)/(λ² + ω²)`; the
/// denominator never vanishes because `ω² > 0`. The homogeneous part matches
/// the initial values.
fn forced_oscillator(c: f64, d: f64, modes: &EnergyModes, pz0: f64, dz0: f64) -> (Signal, Signal) {
    let w2 = -c * d;
    let g = modes.gamma;
    let mut p = Signal::zero();
    let mut q = Signal::zero();
    let mut p_part0 = 0.0;
    let mut q_part0 = 0.0;
    for (lambda, e, r) in [(g, modes.e_plus, modes.r_plus), (-g, modes.e_minus, modes.r_minus)] {
        let den = lambda * lambda + w2;
        let a = (lambda * e + c * r) / den;
        let b = (lambda * r + d * e) / den;
        p = p.with(a, Basis::Exp(lambda));
        q = q.with(b, Basis::Exp(lambda));
        p_part0 += a;
        q_part0 += b;
    }
    let (hp, hq) = oscillator(c, d, pz0 - p_part0, dz0 - q_part0);
    (p.plus(&hp), q.plus(&hq))
}

/// Closed-form trajectories of every reduced component.
#[derive(Debug, Clone, Serialize)]
pub struct AnalyticSolution {
    t0: f64,
    credit: Signal,
    repayment: Signal,
    cum_credit: Signal,
    cum_repayment: Signal,
    /// Per axis, in [`AxisMoments`] order.
    axes: Vec<[Signal; AxisMoments::LEN]>,
}

impl AnalyticSolution {
    /// Requires the coupling sign constraints.
    pub fn new(p: &ReducedParams, initial: &ReducedState) -> Result<Self> {
        p.validate()?;
        if p.risks() != initial.risks() {
            return Err(Error::invalid("state and parameter dimensions differ"));
        }
        let mut axes = Vec::with_capacity(p.risks());
        let mut pz_total = Signal::zero();
        let mut dz_total = Signal::zero();
        for (k, m) in p.axes.iter().zip(&initial.axes) {
            let (px, dx) = oscillator(k.c_x, k.d_x, m.px, m.dx);
            let (py, dy) = oscillator(k.c_y, k.d_y, m.py, m.dy);
            let mx = EnergyModes::new(k.mu_x, k.eta_x, m.ecx, m.erx);
            let my = EnergyModes::new(k.mu_y, k.eta_y, m.ecy, m.ery);
            let (ecx, erx) = mx.signals();
            let (ecy, ery) = my.signals();
            let (pzx, dzx) = forced_oscillator(k.c_x, k.d_x, &mx, m.pzx, m.dzx);
            let (pzy, dzy) = forced_oscillator(k.c_y, k.d_y, &my, m.pzy, m.dzy);
            pz_total = pz_total.plus(&pzx).plus(&pzy);
            dz_total = dz_total.plus(&dzx).plus(&dzy);
            axes.push([px, py, dx, dy, pzx, pzy, dzx, dzy, ecx, ecy, erx, ery]);
        }
        let credit = Signal::constant(initial.credit).plus(&dz_total.integral().scaled(p.a));
        let repayment = Signal::constant(initial.repayment).plus(&pz_total.integral().scaled(p.b));
        let cum_credit = Signal::constant(initial.cum_credit).plus(&credit.integral());
        let cum_repayment = Signal::constant(initial.cum_repayment).plus(&repayment.integral());
        Ok(Self {
            t0: initial.time,
            credit,
            repayment,
            cum_credit,
            cum_repayment,
            axes,
        })
    }

    pub fn credit(&self) -> &Signal {
        &self.credit
    }

    pub fn repayment(&self) -> &Signal {
        &self.repayment
    }

    pub fn cum_credit(&self) -> &Signal {
        &self.cum_credit
    }

    /// Component signals of axis `i` in [`AxisMoments`] order.
    pub fn axis(&self, i: usize) -> &[Signal; AxisMoments::LEN] {
        &self.axes[i]
    }

    /// State at absolute time `t`.
    pub fn state_at(&self, t: f64) -> ReducedState {
        let s = t - self.t0;
        ReducedState {
            time: t,
            credit: self.credit.eval(s),
            repayment: self.repayment.eval(s),
            cum_credit: self.cum_credit.eval(s),
            cum_repayment: self.cum_repayment.eval(s),
            axes: self
                .axes
                .iter()
                .map(|sig| AxisMoments::from_slice(&sig.iter().map(|f| f.eval(s)).collect::<Vec<_>>()))
                .collect(),
        }
    }
}

/// Impulse totals of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct AxisImpulses {
    pub px: f64,
    pub py: f64,
    pub dx: f64,
    pub dy: f64,
}

/// `P_xi(t) = P_xi(0) cos ω_i t + (c_xi D_xi(0)/ω_i) sin ω_i t`, and likewise
/// for `D_xi` and the borrower side.
pub fn analytic_impulses(p: &ReducedParams, initial: &ReducedState, t: f64) -> Result<Vec<AxisImpulses>> {
    let s = AnalyticSolution::new(p, initial)?.state_at(t);
    Ok(s.axes
        .iter()
        .map(|a| AxisImpulses {
            px: a.px,
            py: a.py,
            dx: a.dx,
            dy: a.dy,
        })
        .collect())
}

/// `EC(t) = EC(0) cosh γt + (μ ER(0)/γ) sinh γt`, and symmetrically for `ER`.
pub fn analytic_energies(p: &ReducedParams, initial: &ReducedState, t: f64) -> Result<Vec<AxisEnergies>> {
    let s = AnalyticSolution::new(p, initial)?.state_at(t);
    Ok(s.axes
        .iter()
        .map(|a| AxisEnergies {
            ecx: a.ecx,
            ecy: a.ecy,
            erx: a.erx,
            ery: a.ery,
        })
        .collect())
}

/// Full closed-form state, including `Pz`, `Dz`, the totals and the cumulative
/// Credits.
pub fn analytic_pz_credit(p: &ReducedParams, initial: &ReducedState, t: f64) -> Result<ReducedState> {
    Ok(AnalyticSolution::new(p, initial)?.state_at(t))
}
