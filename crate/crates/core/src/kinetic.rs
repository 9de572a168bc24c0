//! Agents ("economic particles") trading pairwise credit.
//!
//! Each agent carries a risk position in the domain and a velocity driven by a
//! mean-reverting diffusion. Every ordered pair trades with a fixed probability
//! per step; realized transactions are binned onto the pair-space grid to give
//! the Credit density `CL` and the transaction impulse `P`.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{EconomicDomain, GridSpec, ScalarField, VectorField};
use crate::hydro::{compute_moments, FluidState, HydroSettings, MomentSet, DEFAULT_EPSILON_FACTOR};

/// One agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EParticle {
    pub id: usize,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub cumulative_credits_issued: f64,
    pub cumulative_loans_received: f64,
}

/// Credit `amount` (volume per unit time) from creditor to borrower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub creditor_id: usize,
    pub borrower_id: usize,
    pub amount: f64,
    pub time: f64,
}

/// Agents inside a domain at a common time.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub domain: EconomicDomain,
    pub agents: Vec<EParticle>,
    pub time: f64,
}

impl Population {
    pub fn new(domain: EconomicDomain, agents: Vec<EParticle>) -> Result<Self> {
        let n = domain.dimension();
        for a in &agents {
            if a.position.len() != n || a.velocity.len() != n {
                return Err(Error::invalid(format!(
                    "agent {} does not have {n} risk coordinates",
                    a.id
                )));
            }
            for (i, (x, b)) in a.position.iter().zip(domain.bounds()).enumerate() {
                if !(0.0..=*b).contains(x) {
                    return Err(Error::invalid(format!(
                        "agent {} coordinate {} = {x} lies outside [0, {b}]",
                        a.id,
                        i + 1
                    )));
                }
            }
        }
        Ok(Self {
            domain,
            agents,
            time: 0.0,
        })
    }
}

/// Mean-reverting velocity law, per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityProcess {
    /// Reversion rate `θ`.
    pub theta: Vec<f64>,
    /// Volatility `σ`.
    pub sigma: Vec<f64>,
}

/// Bernoulli pair kernel with log-normal amounts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransactionKernel {
    /// Rate `λ` per ordered pair per unit time.
    pub rate: f64,
    /// Median amount `s`.
    pub amount_scale: f64,
    /// Log-normal shape (standard deviation of `ln amount`).
    pub amount_shape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticConfig {
    pub agent_count: usize,
    pub seed: u64,
    pub dt: f64,
    pub velocity: VelocityProcess,
    pub kernel: TransactionKernel,
}

impl KineticConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.agent_count < 2 {
            return Err(Error::invalid(format!(
                "agent_count must be at least 2, got {}",
                self.agent_count
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        let v = &self.velocity;
        if v.theta.len() != n || v.sigma.len() != n {
            return Err(Error::invalid(format!("velocity theta and sigma need {n} entries")));
        }
        if v.theta.iter().chain(&v.sigma).any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::invalid("velocity theta and sigma must be nonnegative"));
        }
        let k = &self.kernel;
        if !(k.rate.is_finite() && k.rate >= 0.0) {
            return Err(Error::invalid(format!(
                "transaction rate must be nonnegative, got {}",
                k.rate
            )));
        }
        if !(k.amount_scale.is_finite() && k.amount_scale > 0.0) {
            return Err(Error::invalid(format!(
                "amount scale must be positive, got {}",
                k.amount_scale
            )));
        }
        if !(k.amount_shape.is_finite() && k.amount_shape >= 0.0) {
            return Err(Error::invalid(format!(
                "amount shape must be nonnegative, got {}",
                k.amount_shape
            )));
        }
        Ok(())
    }
}

/// Uniform positions; velocities from the stationary law `N(0, σ²/2θ)`, or
/// zero on axes without reversion.
pub fn initial_population(domain: &EconomicDomain, config: &KineticConfig, rng: &mut impl Rng) -> Result<Population> {
    config.validate(domain.dimension())?;
    let agents = (0..config.agent_count)
        .map(|id| {
            let position = domain.bounds().iter().map(|b| rng.random_range(0.0..=*b)).collect();
            let velocity = config
                .velocity
                .theta
                .iter()
                .zip(&config.velocity.sigma)
                .map(|(th, s)| {
                    if *th > 0.0 {
                        let xi: f64 = StandardNormal.sample(rng);
                        s / (2.0 * th).sqrt() * xi
                    } else {
                        0.0
                    }
                })
                .collect();
            EParticle {
                id,
                position,
                velocity,
                cumulative_credits_issued: 0.0,
                cumulative_loans_received: 0.0,
            }
        })
        .collect();
    Population::new(domain.clone(), agents)
}

/// Folds `x` back into `[0, b]`, flipping `v` once per wall hit.
fn reflect(x: &mut f64, v: &mut f64, b: f64) {
    loop {
        if *x < 0.0 {
            *x = -*x;
        } else if *x > b {
            *x = 2.0 * b - *x;
        } else {
            return;
        }
        *v = -*v;
    }
}

/// `v ← v − θ v dt + σ √dt ξ`, then `x ← x + v dt` with mirror reflection.
pub fn step_agents(pop: &mut Population, process: &VelocityProcess, dt: f64, rng: &mut impl Rng) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let n = pop.domain.dimension();
    if process.theta.len() != n || process.sigma.len() != n {
        return Err(Error::invalid(format!("velocity theta and sigma need {n} entries")));
    }
    let sq = dt.sqrt();
    for agent in &mut pop.agents {
        for i in 0..n {
            let (th, s) = (process.theta[i], process.sigma[i]);
            let mut v = agent.velocity[i] - th * agent.velocity[i] * dt;
            if s != 0.0 {
                let xi: f64 = StandardNormal.sample(rng);
                v += s * sq * xi;
            }
            let mut x = agent.position[i] + v * dt;
            reflect(&mut x, &mut v, pop.domain.bounds()[i]);
            agent.position[i] = x;
            agent.velocity[i] = v;
        }
    }
    pop.time += dt;
    Ok(())
}

/// Each ordered pair `(i, j)`, `i ≠ j`, trades with probability `min(1, λ dt)`.
/// Realized pairs are found by geometric skipping over the `N(N−1)` pairs.
/// Agents' cumulative counters grow by `amount·dt`.
pub fn generate_transactions(
    pop: &mut Population,
    kernel: &TransactionKernel,
    dt: f64,
    rng: &mut impl Rng,
) -> Result<Vec<TransactionRecord>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let p = (kernel.rate * dt).min(1.0);
    let n = pop.agents.len();
    if p <= 0.0 || n < 2 {
        return Ok(Vec::new());
    }
    let amounts = LogNormal::new(kernel.amount_scale.ln(), kernel.amount_shape)
        .map_err(|e| Error::invalid(format!("amount law: {e}")))?;
    let pairs = (n * (n - 1)) as u64;
    let mut picked = Vec::new();
    if p >= 1.0 {
        picked.extend(0..pairs);
    } else {
        let skip = Geometric::new(p).map_err(|e| Error::invalid(format!("pair law: {e}")))?;
        let mut k = skip.sample(rng);
        while k < pairs {
            picked.push(k);
            k = k.saturating_add(1).saturating_add(skip.sample(rng));
        }
    }
    let mut records = Vec::with_capacity(picked.len());
    for k in picked {
        let i = (k / (n as u64 - 1)) as usize;
        let r = (k % (n as u64 - 1)) as usize;
        let j = if r >= i { r + 1 } else { r };
        let amount: f64 = amounts.sample(rng);
        pop.agents[i].cumulative_credits_issued += amount * dt;
        pop.agents[j].cumulative_loans_received += amount * dt;
        records.push(TransactionRecord {
            creditor_id: pop.agents[i].id,
            borrower_id: pop.agents[j].id,
            amount,
            time: pop.time,
        });
    }
    Ok(records)
}

fn index_agents(agents: &[EParticle]) -> HashMap<usize, &EParticle> {
    agents.iter().map(|a| (a.id, a)).collect()
}

/// Bins records into `CL` and `P` on the pair grid: the cell of
/// (creditor position, borrower position) receives `amount/measure` of Credit,
/// `amount·v_creditor/measure` on the x-side impulse and
/// `amount·v_borrower/measure` on the y-side.
pub fn bin_transactions(
    records: &[TransactionRecord],
    agents: &[EParticle],
    grid: &Arc<GridSpec>,
) -> Result<(ScalarField, VectorField)> {
    let n = grid.risks();
    let by_id = index_agents(agents);
    let mut cl = vec![0.0; grid.cell_count()];
    let mut imp = vec![vec![0.0; grid.cell_count()]; 2 * n];
    for r in records {
        let find = |id: usize| {
            by_id
                .get(&id)
                .copied()
                .ok_or_else(|| Error::invalid(format!("transaction references unknown agent {id}")))
        };
        let (c, b) = (find(r.creditor_id)?, find(r.borrower_id)?);
        if c.position.len() != n || b.position.len() != n {
            return Err(Error::invalid(format!("agents must have {n} risk coordinates")));
        }
        let cell = grid.locate_pair(&c.position, &b.position);
        cl[cell] += r.amount;
        for i in 0..n {
            imp[i][cell] += r.amount * c.velocity[i];
            imp[n + i][cell] += r.amount * b.velocity[i];
        }
    }
    let w = grid.cell_measure();
    let to_field = |mut v: Vec<f64>| {
        v.iter_mut().for_each(|x| *x /= w);
        ScalarField::from_raw(grid, v)
    };
    let credit = to_field(cl);
    let impulse = VectorField::from_components(imp.into_iter().map(to_field).collect())?;
    Ok((credit, impulse))
}

/// Output of one kinetic step.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticStep {
    pub time: f64,
    pub records: Vec<TransactionRecord>,
    /// Agents after the move, as used for binning.
    pub agents: Vec<EParticle>,
    pub credit: ScalarField,
    pub impulse: VectorField,
    /// Moments of the binned fields; Loan-Repayment entries are zero.
    pub moments: MomentSet,
}

/// Runs `steps` rounds of move, trade, bin from a seeded initial population.
pub fn run_kinetic(config: &KineticConfig, grid: &Arc<GridSpec>, steps: usize) -> Result<Vec<KineticStep>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pop = initial_population(grid.domain(), config, &mut rng)?;
    let mut out = Vec::with_capacity(steps);
    for k in 1..=steps {
        let at = |e: Error| Error::AtStep {
            step: k,
            source: Box::new(e),
        };
        step_agents(&mut pop, &config.velocity, config.dt, &mut rng).map_err(at)?;
        // time from the step count, not by accumulation
        pop.time = k as f64 * config.dt;
        let records = generate_transactions(&mut pop, &config.kernel, config.dt, &mut rng).map_err(at)?;
        let (credit, impulse) = bin_transactions(&records, &pop.agents, grid).map_err(at)?;
        let mut state = FluidState::zeros(grid);
        state.time = pop.time;
        state.credit = credit;
        state.credit_impulse = impulse;
        state.cum_credit = pop.agents.iter().map(|a| a.cumulative_credits_issued).sum();
        let settings = HydroSettings::for_state(&state, f64::INFINITY, DEFAULT_EPSILON_FACTOR);
        let moments = compute_moments(&state, &settings).map_err(at)?;
        out.push(KineticStep {
            time: pop.time,
            records,
            agents: pop.agents.clone(),
            credit: state.credit,
            impulse: state.credit_impulse,
            moments,
        });
    }
    Ok(out)
}
