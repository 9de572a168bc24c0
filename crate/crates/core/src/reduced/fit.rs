//! Least-squares fitting of the business-cycle form
//!
//! ```text
//! C(t) = C0 + Σ_i [α_i sin ω_i t + β_i cos ω_i t + δ_i sin ν_i t + ζ_i cos ν_i t] + κ e^{γt}
//! ```
//!
//! by a damped Gauss–Newton (Levenberg–Marquardt) iteration with analytic
//! partial derivatives, plus a linear projection onto the full closed-form
//! basis when all frequencies and rates are known.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::DerivedRates;

/// Sampled series with strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::invalid("times and values differ in length"));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::invalid("series contains non-finite entries"));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "timestamps must be strictly increasing (row {} -> {})",
                i,
                i + 1
            )));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Oscillation parameters for one risk axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CycleAxis {
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
    pub delta: f64,
    pub zeta: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CycleParameters {
    pub c0: f64,
    pub axes: Vec<CycleAxis>,
    pub kappa: f64,
    pub gamma: f64,
}

impl CycleParameters {
    pub fn len_for(n: usize) -> usize {
        3 + 6 * n
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = vec![self.c0];
        for a in &self.axes {
            v.extend([a.alpha, a.beta, a.omega, a.delta, a.zeta, a.nu]);
        }
        v.extend([self.kappa, self.gamma]);
        v
    }

    pub fn from_vector(v: &[f64]) -> Self {
        let n = (v.len() - 3) / 6;
        Self {
            c0: v[0],
            axes: (0..n)
                .map(|i| {
                    let b = 1 + 6 * i;
                    CycleAxis {
                        alpha: v[b],
                        beta: v[b + 1],
                        omega: v[b + 2],
                        delta: v[b + 3],
                        zeta: v[b + 4],
                        nu: v[b + 5],
                    }
                })
                .collect(),
            kappa: v[1 + 6 * n],
            gamma: v[2 + 6 * n],
        }
    }

    /// Parameter names in vector order.
    pub fn names(n: usize) -> Vec<String> {
        let mut v = vec!["c0".to_string()];
        for i in 1..=n {
            for s in ["alpha", "beta", "omega", "delta", "zeta", "nu"] {
                v.push(format!("{s}{i}"));
            }
        }
        v.extend(["kappa".to_string(), "gamma".to_string()]);
        v
    }

    pub fn eval(&self, t: f64) -> f64 {
        let osc: f64 = self
            .axes
            .iter()
            .map(|a| {
                let (so, co) = (a.omega * t).sin_cos();
                let (sn, cn) = (a.nu * t).sin_cos();
                a.alpha * so + a.beta * co + a.delta * sn + a.zeta * cn
            })
            .sum();
        self.c0 + osc + self.kappa * (self.gamma * t).exp()
    }

    /// Model value and gradient with respect to the parameter vector.
    pub(crate) fn eval_with_gradient(&self, t: f64, grad: &mut [f64]) -> f64 {
        grad[0] = 1.0;
        let mut f = self.c0;
        for (i, a) in self.axes.iter().enumerate() {
            let b = 1 + 6 * i;
            let (so, co) = (a.omega * t).sin_cos();
            let (sn, cn) = (a.nu * t).sin_cos();
            grad[b] = so;
            grad[b + 1] = co;
            grad[b + 2] = t * (a.alpha * co - a.beta * so);
            grad[b + 3] = sn;
            grad[b + 4] = cn;
            grad[b + 5] = t * (a.delta * cn - a.zeta * sn);
            f += a.alpha * so + a.beta * co + a.delta * sn + a.zeta * cn;
        }
        let k = 1 + 6 * self.axes.len();
        let e = (self.gamma * t).exp();
        grad[k] = e;
        grad[k + 1] = self.kappa * t * e;
        f + self.kappa * e
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative step tolerance per parameter.
    pub x_tolerance: f64,
    /// Relative cost-reduction tolerance.
    pub f_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            x_tolerance: 1e-12,
            f_tolerance: 1e-15,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    MaxIterations,
    /// Damping saturated without reducing the cost.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub parameters: CycleParameters,
    pub names: Vec<String>,
    pub rmse: f64,
    pub iterations: usize,
    pub status: FitStatus,
    pub converged: bool,
    /// Per parameter: last step within tolerance.
    pub parameter_converged: Vec<bool>,
    pub rank_deficient: bool,
}

fn residuals_and_jacobian(p: &CycleParameters, s: &TimeSeries, jac: &mut DMatrix<f64>) -> DVector<f64> {
    let np = jac.ncols();
    let mut grad = vec![0.0; np];
    DVector::from_iterator(
        s.len(),
        s.times.iter().zip(&s.values).enumerate().map(|(row, (&t, &y))| {
            let f = p.eval_with_gradient(t, &mut grad);
            for (col, g) in grad.iter().enumerate() {
                jac[(row, col)] = *g;
            }
            f - y
        }),
    )
}

fn cost(p: &CycleParameters, s: &TimeSeries) -> f64 {
    s.times
        .iter()
        .zip(&s.values)
        .map(|(&t, &y)| (p.eval(t) - y).powi(2))
        .sum::<f64>()
}

fn rank_deficient(jac: &DMatrix<f64>) -> bool {
    let sv = jac.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    max.is_nan() || max <= 0.0 || min <= 1e-10 * max
}

/// Levenberg–Marquardt fit of the cycle form with `n` frequency pairs.
///
/// Non-convergence and rank deficiency are reported in the result, not as errors.
pub fn fit_cycle_parameters(
    series: &TimeSeries,
    n: usize,
    guess: &CycleParameters,
    opts: &FitOptions,
) -> Result<FitReport> {
    let np = CycleParameters::len_for(n);
    if guess.axes.len() != n {
        return Err(Error::invalid(format!(
            "initial guess has {} axes, expected {n}",
            guess.axes.len()
        )));
    }
    if series.len() < 3 * np {
        return Err(Error::invalid(format!(
            "series has {} points; at least {} (3 x {np} parameters) required",
            series.len(),
            3 * np
        )));
    }
    if guess.to_vector().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial guess contains non-finite values"));
    }

    let mut p = guess.clone();
    let mut jac = DMatrix::zeros(series.len(), np);
    let mut r = residuals_and_jacobian(&p, series, &mut jac);
    let mut c = r.norm_squared();
    let mut lambda = opts.initial_damping;
    let mut status = FitStatus::MaxIterations;
    let mut flags = vec![false; np];
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        if c == 0.0 {
            flags.iter_mut().for_each(|f| *f = true);
            status = FitStatus::Converged;
            break;
        }
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let diag_floor = 1e-12 * jtj.diagonal().max().max(f64::MIN_POSITIVE);
        let pv = DVector::from_vec(p.to_vector());

        let mut accepted = None;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for j in 0..np {
                a[(j, j)] += lambda * jtj[(j, j)].max(diag_floor);
            }
            let step = a.cholesky().map(|ch| ch.solve(&(-&g)));
            if let Some(step) = step {
                let trial = CycleParameters::from_vector((&pv + &step).as_slice());
                let tc = cost(&trial, series);
                if tc.is_finite() && tc <= c {
                    accepted = Some((trial, step, tc));
                    break;
                }
            }
            lambda *= 10.0;
        }

        let Some((trial, step, tc)) = accepted else {
            status = FitStatus::Stalled;
            break;
        };
        for (j, f) in flags.iter_mut().enumerate() {
            *f = step[j].abs() <= opts.x_tolerance * (pv[j].abs() + opts.x_tolerance);
        }
        let reduction = (c - tc) / c.max(f64::MIN_POSITIVE);
        p = trial;
        c = tc;
        r = residuals_and_jacobian(&p, series, &mut jac);
        lambda = (lambda / 10.0).max(1e-15);
        if flags.iter().all(|f| *f) || reduction <= opts.f_tolerance {
            status = FitStatus::Converged;
            break;
        }
    }
    // a stall at an exact optimum is convergence
    if status == FitStatus::Stalled && g_small(&jac, &r) {
        status = FitStatus::Converged;
    }

    let mean = series.values.iter().sum::<f64>() / series.len() as f64;
    let constant = series
        .values
        .iter()
        .all(|v| (v - mean).abs() <= 1e-14 * mean.abs().max(1.0));
    Ok(FitReport {
        names: CycleParameters::names(n),
        rmse: (c / series.len() as f64).sqrt(),
        iterations,
        converged: status == FitStatus::Converged,
        status,
        parameter_converged: flags,
        rank_deficient: constant || rank_deficient(&jac),
        parameters: p,
    })
}

fn g_small(jac: &DMatrix<f64>, r: &DVector<f64>) -> bool {
    let g = jac.transpose() * r;
    g.amax() <= 1e-12 * (1.0 + jac.amax() * r.amax())
}

/// Linear least-squares projection onto
/// `{1, sin ω_i t, cos ω_i t, sin ν_i t, cos ν_i t, e^{±γ_xi t}, e^{±γ_yi t}}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormFit {
    pub labels: Vec<String>,
    pub coefficients: Vec<f64>,
    pub rmse: f64,
    pub max_abs_residual: f64,
}

pub fn fit_closed_form(series: &TimeSeries, rates: &[DerivedRates]) -> Result<ClosedFormFit> {
    let mut labels = vec!["const".to_string()];
    let mut basis: Vec<Box<dyn Fn(f64) -> f64>> = vec![Box::new(|_| 1.0)];
    for (i, r) in rates.iter().enumerate() {
        let i = i + 1;
        let (w, nu, gx, gy) = (r.omega, r.nu, r.gamma_x, r.gamma_y);
        labels.extend(
            [
                "sin_omega",
                "cos_omega",
                "sin_nu",
                "cos_nu",
                "exp_gx",
                "exp_-gx",
                "exp_gy",
                "exp_-gy",
            ]
            .map(|s| format!("{s}{i}")),
        );
        basis.push(Box::new(move |t| (w * t).sin()));
        basis.push(Box::new(move |t| (w * t).cos()));
        basis.push(Box::new(move |t| (nu * t).sin()));
        basis.push(Box::new(move |t| (nu * t).cos()));
        basis.push(Box::new(move |t| (gx * t).exp()));
        basis.push(Box::new(move |t| (-gx * t).exp()));
        basis.push(Box::new(move |t| (gy * t).exp()));
        basis.push(Box::new(move |t| (-gy * t).exp()));
    }
    if series.len() < basis.len() {
        return Err(Error::invalid("series shorter than the closed-form basis"));
    }
    let a = DMatrix::from_fn(series.len(), basis.len(), |row, col| basis[col](series.times[row]));
    let y = DVector::from_column_slice(&series.values);
    let svd = a.clone().svd(true, true);
    let cutoff = 1e-14 * svd.singular_values.max();
    let coef = svd
        .solve(&y, cutoff)
        .map_err(|e| Error::invalid(format!("closed-form projection failed: {e}")))?;
    let res = &a * &coef - &y;
    Ok(ClosedFormFit {
        labels,
        coefficients: coef.iter().copied().collect(),
        rmse: (res.norm_squared() / series.len() as f64).sqrt(),
        max_abs_residual: res.amax(),
    })
}

/// Starting point for [`fit_cycle_parameters`] built from known rates.
///
/// Frequencies are `ω_i`, `ν_i` and the growth rate is the largest of the
/// `γ_xi`, `γ_yi`; the linear coefficients come from a least-squares
/// projection with those held fixed.
pub fn seed_cycle_parameters(series: &TimeSeries, rates: &[DerivedRates]) -> Result<CycleParameters> {
    let gamma = rates.iter().fold(0.0f64, |g, r| g.max(r.gamma_x).max(r.gamma_y));
    let mut p = CycleParameters {
        c0: 0.0,
        axes: rates
            .iter()
            .map(|r| CycleAxis {
                omega: r.omega,
                nu: r.nu,
                ..CycleAxis::default()
            })
            .collect(),
        kappa: 0.0,
        gamma,
    };
    let np = CycleParameters::len_for(rates.len());
    let linear: Vec<usize> = (0..np)
        .filter(|&k| k == 0 || k == np - 2 || (k < np - 2 && (k - 1) % 3 != 2))
        .collect();
    if series.len() < linear.len() {
        return Err(Error::invalid("series shorter than the number of linear coefficients"));
    }
    let mut grad = vec![0.0; np];
    let a = DMatrix::from_fn(series.len(), linear.len(), |row, col| {
        p.eval_with_gradient(series.times[row], &mut grad);
        grad[linear[col]]
    });
    let y = DVector::from_column_slice(&series.values);
    let svd = a.svd(true, true);
    let cutoff = 1e-14 * svd.singular_values.max();
    let coef = svd
        .solve(&y, cutoff)
        .map_err(|e| Error::invalid(format!("linear projection failed: {e}")))?;
    let mut v = p.to_vector();
    for (k, c) in linear.iter().zip(coef.iter()) {
        v[*k] = *c;
    }
    p = CycleParameters::from_vector(&v);
    Ok(p)
}
