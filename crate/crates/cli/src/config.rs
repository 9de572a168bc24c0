//! TOML run configuration.
//!
//! Every table rejects unknown keys. Frequencies and growth rates are derived
//! from the couplings and cannot be set directly.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use econflow_core::hydro::{GaussianBump, InitialCondition, DEFAULT_CFL_LIMIT, DEFAULT_EPSILON_FACTOR};
use econflow_core::kinetic::{KineticConfig, TransactionKernel, VelocityProcess};
use econflow_core::reduced::{CycleAxis, CycleParameters, ReducedState};
use econflow_core::validation::{DEFAULT_PZ_TOLERANCE, DEFAULT_TRACKING_TOLERANCE};
use econflow_core::{make_grid, AxisCoupling, CouplingParams, EconomicDomain, GridSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Default ceiling on the number of pair-space cells.
pub const DEFAULT_MAX_CELLS: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Kinetic,
    Hydro,
    Ode,
    Analytic,
    Validate,
    Fit,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Kinetic => "kinetic",
            Mode::Hydro => "hydro",
            Mode::Ode => "ode",
            Mode::Analytic => "analytic",
            Mode::Validate => "validate",
            Mode::Fit => "fit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub seed: u64,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub domain: Option<DomainSection>,
    pub grid: Option<GridSection>,
    pub coupling: Option<CouplingSection>,
    pub initial: Option<InitialSection>,
    pub kinetic: Option<KineticSection>,
    pub fit: Option<FitSection>,
    pub validate: Option<ValidateSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub n: usize,
    /// Upper limits `X_i`; all 1 when omitted.
    pub bounds: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub cells_per_axis: usize,
    #[serde(default = "default_max_cells")]
    pub max_cells: usize,
    #[serde(default = "default_cfl_limit")]
    pub cfl_limit: f64,
    #[serde(default = "default_epsilon_factor")]
    pub epsilon_factor: f64,
}

fn default_max_cells() -> usize {
    DEFAULT_MAX_CELLS
}

fn default_cfl_limit() -> f64 {
    DEFAULT_CFL_LIMIT
}

fn default_epsilon_factor() -> f64 {
    DEFAULT_EPSILON_FACTOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub a: f64,
    pub b: f64,
    /// One entry per risk axis.
    pub axis: Vec<AxisSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    pub c_x: f64,
    pub c_y: f64,
    pub d_x: f64,
    pub d_y: f64,
    pub mu_x: f64,
    pub mu_y: f64,
    pub eta_x: f64,
    pub eta_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub credit: Option<BumpSection>,
    pub repayment: Option<BumpSection>,
    pub moments: Option<MomentsSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSection {
    /// `2n` pair-space coordinates, creditor axes first.
    pub center: Vec<f64>,
    pub width: f64,
    pub mass: f64,
    /// Bulk velocity, `2n` components.
    pub velocity: Vec<f64>,
    #[serde(default)]
    pub background: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsSection {
    #[serde(default, rename = "C")]
    pub credit: f64,
    #[serde(default, rename = "LR")]
    pub repayment: f64,
    #[serde(default, rename = "MC")]
    pub cum_credit: f64,
    #[serde(default, rename = "ML")]
    pub cum_repayment: f64,
    #[serde(default)]
    pub axis: Vec<AxisMomentsSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AxisMomentsSection {
    pub px: f64,
    pub py: f64,
    pub dx: f64,
    pub dy: f64,
    pub pzx: f64,
    pub pzy: f64,
    pub dzx: f64,
    pub dzy: f64,
    pub ecx: f64,
    pub ecy: f64,
    pub erx: f64,
    pub ery: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticSection {
    pub agents: usize,
    pub theta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub rate: f64,
    pub amount_scale: f64,
    #[serde(default)]
    pub amount_shape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// CSV with a `time` column, relative to the config file.
    pub input: PathBuf,
    #[serde(default = "default_column")]
    pub column: String,
    /// Number of frequency pairs; defaults to the coupling axis count.
    pub pairs: Option<usize>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    pub guess: Option<GuessSection>,
}

fn default_column() -> String {
    "C".into()
}

fn default_max_iterations() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuessSection {
    pub c0: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub axis: Vec<GuessAxis>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuessAxis {
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    pub omega: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub zeta: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    #[serde(default = "default_pz_tolerance")]
    pub pz_tolerance: f64,
    #[serde(default = "default_tracking_tolerance")]
    pub tracking_tolerance: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            pz_tolerance: DEFAULT_PZ_TOLERANCE,
            tracking_tolerance: DEFAULT_TRACKING_TOLERANCE,
        }
    }
}

fn default_pz_tolerance() -> f64 {
    DEFAULT_PZ_TOLERANCE
}

fn default_tracking_tolerance() -> f64 {
    DEFAULT_TRACKING_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_moments")]
    pub moments: String,
    #[serde(default = "default_manifest")]
    pub manifest: String,
    #[serde(default = "default_report")]
    pub report: String,
    /// Hydro field snapshots every this many steps; 0 disables them.
    #[serde(default)]
    pub snapshot_every: usize,
    /// Kinetic mode: also write the raw transaction records.
    #[serde(default)]
    pub transactions: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            moments: default_moments(),
            manifest: default_manifest(),
            report: default_report(),
            snapshot_every: 0,
            transactions: false,
        }
    }
}

fn default_moments() -> String {
    "moments.csv".into()
}

fn default_manifest() -> String {
    "manifest.json".into()
}

fn default_report() -> String {
    "report.json".into()
}

/// A validated configuration for one mode.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub file: FileConfig,
    /// Directory that relative input paths are resolved against.
    pub base_dir: PathBuf,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn require<'a, T>(v: &'a Option<T>, key: &str, mode: Mode) -> Result<&'a T, CliError> {
    v.as_ref()
        .ok_or_else(|| bad(key, format!("required in {} mode", mode.name())))
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be positive, got {v}")))
    }
}

/// Parses and validates `text` for `mode`.
pub fn parse_config(text: &str, mode: Mode) -> Result<RunConfig, CliError> {
    let file: FileConfig = toml::from_str(text).map_err(|e| CliError::Config(format!("config parse error: {e}")))?;
    let cfg = RunConfig {
        mode,
        file,
        base_dir: PathBuf::from("."),
    };
    cfg.check()?;
    Ok(cfg)
}

/// Reads and parses the file at `path`; relative inputs resolve against its directory.
pub fn load_config(path: &Path, mode: Mode) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut cfg = parse_config(&text, mode)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(cfg)
}

impl RunConfig {
    fn check(&self) -> Result<(), CliError> {
        let f = &self.file;
        let mode = self.mode;
        if let Some(dt) = f.dt {
            positive("dt", dt)?;
        }
        if let Some(d) = &f.domain {
            self.domain_of(d)?;
        }
        if let Some(c) = &f.coupling {
            self.coupling_of(c)?;
        }
        if let Some(v) = &f.validate {
            positive("validate.pz_tolerance", v.pz_tolerance)?;
            positive("validate.tracking_tolerance", v.tracking_tolerance)?;
        }
        match mode {
            Mode::Kinetic => {
                self.stepping()?;
                self.grid()?;
                self.kinetic()?;
            }
            Mode::Hydro | Mode::Validate => {
                self.stepping()?;
                self.grid()?;
                self.couplings()?;
                self.initial_condition()?;
                if mode == Mode::Validate && f.kinetic.is_some() {
                    self.kinetic()?;
                }
            }
            Mode::Ode | Mode::Analytic => {
                self.stepping()?;
                self.couplings()?;
                let has_moments = f.initial.as_ref().is_some_and(|i| i.moments.is_some());
                if has_moments {
                    self.initial_moments_section()?;
                } else {
                    self.grid()?;
                    self.initial_condition()?;
                }
            }
            Mode::Fit => {
                let fit = require(&f.fit, "fit", mode)?;
                if fit.column.is_empty() || fit.column == "time" {
                    return Err(bad("fit.column", "must name a value column other than time"));
                }
                if fit.guess.is_none() && f.coupling.is_none() {
                    return Err(bad(
                        "fit.guess",
                        "required unless a [coupling] table provides the rates",
                    ));
                }
                let pairs = self.fit_pairs()?;
                if pairs == 0 {
                    return Err(bad("fit.pairs", "must be at least 1"));
                }
                if fit.max_iterations == 0 {
                    return Err(bad("fit.max_iterations", "must be at least 1"));
                }
                if fit.guess.is_none() && self.couplings()?.risks() != pairs {
                    return Err(bad(
                        "fit.guess",
                        "required when fit.pairs differs from the coupling axis count",
                    ));
                }
                self.fit_guess_section()?;
            }
        }
        Ok(())
    }

    /// `(dt, steps)`.
    pub fn stepping(&self) -> Result<(f64, usize), CliError> {
        let dt = *require(&self.file.dt, "dt", self.mode)?;
        positive("dt", dt)?;
        let steps = *require(&self.file.steps, "steps", self.mode)?;
        Ok((dt, steps))
    }

    fn domain_of(&self, d: &DomainSection) -> Result<EconomicDomain, CliError> {
        let bounds = d.bounds.clone().unwrap_or_else(|| vec![1.0; d.n]);
        if bounds.len() != d.n {
            return Err(bad(
                "domain.bounds",
                format!("needs n = {} entries, got {}", d.n, bounds.len()),
            ));
        }
        EconomicDomain::new(bounds).map_err(|e| bad("domain", e))
    }

    pub fn domain(&self) -> Result<EconomicDomain, CliError> {
        self.domain_of(require(&self.file.domain, "domain", self.mode)?)
    }

    pub fn risks(&self) -> Result<usize, CliError> {
        Ok(self.domain()?.dimension())
    }

    pub fn grid_section(&self) -> Result<&GridSection, CliError> {
        let g = require(&self.file.grid, "grid", self.mode)?;
        positive("grid.cfl_limit", g.cfl_limit)?;
        positive("grid.epsilon_factor", g.epsilon_factor)?;
        Ok(g)
    }

    /// Builds the grid after checking the cell-count ceiling.
    pub fn grid(&self) -> Result<Arc<GridSpec>, CliError> {
        let g = self.grid_section()?;
        let domain = self.domain()?;
        if g.cells_per_axis == 0 {
            return Err(bad("grid.cells_per_axis", "must be at least 1"));
        }
        let axes = 2 * domain.dimension() as u32;
        let cells = (g.cells_per_axis as u128).checked_pow(axes);
        match cells {
            Some(c) if c <= g.max_cells as u128 => {}
            _ => {
                return Err(bad(
                    "grid.cells_per_axis",
                    format!(
                        "{}^{axes} cells exceed grid.max_cells = {}",
                        g.cells_per_axis, g.max_cells
                    ),
                ))
            }
        }
        Ok(Arc::new(
            make_grid(domain, g.cells_per_axis).map_err(|e| bad("grid", e))?,
        ))
    }

    fn coupling_of(&self, c: &CouplingSection) -> Result<CouplingParams, CliError> {
        let axes: Vec<AxisCoupling> = c
            .axis
            .iter()
            .map(|a| AxisCoupling {
                c_x: a.c_x,
                c_y: a.c_y,
                d_x: a.d_x,
                d_y: a.d_y,
                mu_x: a.mu_x,
                mu_y: a.mu_y,
                eta_x: a.eta_x,
                eta_y: a.eta_y,
            })
            .collect();
        if let Some(d) = &self.file.domain {
            if axes.len() != d.n {
                return Err(bad(
                    "coupling.axis",
                    format!("needs one entry per risk axis (n = {}), got {}", d.n, axes.len()),
                ));
            }
        }
        CouplingParams::new(c.a, c.b, axes).map_err(|e| match e {
            econflow_core::Error::InvalidArgument(msg) => bad("coupling", msg),
            other => bad("coupling", other),
        })
    }

    pub fn couplings(&self) -> Result<CouplingParams, CliError> {
        self.coupling_of(require(&self.file.coupling, "coupling", self.mode)?)
    }

    pub fn initial_condition(&self) -> Result<InitialCondition, CliError> {
        let init = require(&self.file.initial, "initial", self.mode)?;
        let axes = 2 * self.risks()?;
        let bump = |b: &Option<BumpSection>, key: &str| -> Result<GaussianBump, CliError> {
            let b = b
                .as_ref()
                .ok_or_else(|| bad(key, format!("required in {} mode", self.mode.name())))?;
            if b.center.len() != axes {
                return Err(bad(&format!("{key}.center"), format!("needs {axes} coordinates")));
            }
            if b.velocity.len() != axes {
                return Err(bad(&format!("{key}.velocity"), format!("needs {axes} components")));
            }
            positive(&format!("{key}.width"), b.width)?;
            if !(b.background >= 0.0 && b.background.is_finite()) {
                return Err(bad(&format!("{key}.background"), "must be nonnegative"));
            }
            if !b.mass.is_finite() || b.center.iter().chain(&b.velocity).any(|v| !v.is_finite()) {
                return Err(bad(key, "values must be finite"));
            }
            Ok(GaussianBump {
                center: b.center.clone(),
                width: b.width,
                mass: b.mass,
                velocity: b.velocity.clone(),
                background: b.background,
            })
        };
        Ok(InitialCondition {
            credit: bump(&init.credit, "initial.credit")?,
            repayment: bump(&init.repayment, "initial.repayment")?,
        })
    }

    fn initial_moments_section(&self) -> Result<ReducedState, CliError> {
        let m = self
            .file
            .initial
            .as_ref()
            .and_then(|i| i.moments.as_ref())
            .ok_or_else(|| bad("initial.moments", "missing"))?;
        let n = self.couplings()?.risks();
        if m.axis.len() != n {
            return Err(bad(
                "initial.moments.axis",
                format!("needs one entry per risk axis (n = {n}), got {}", m.axis.len()),
            ));
        }
        let mut s = ReducedState::zeros(n);
        s.credit = m.credit;
        s.repayment = m.repayment;
        s.cum_credit = m.cum_credit;
        s.cum_repayment = m.cum_repayment;
        for (dst, a) in s.axes.iter_mut().zip(&m.axis) {
            dst.px = a.px;
            dst.py = a.py;
            dst.dx = a.dx;
            dst.dy = a.dy;
            dst.pzx = a.pzx;
            dst.pzy = a.pzy;
            dst.dzx = a.dzx;
            dst.dzy = a.dzy;
            dst.ecx = a.ecx;
            dst.ecy = a.ecy;
            dst.erx = a.erx;
            dst.ery = a.ery;
        }
        if !s.is_finite() {
            return Err(bad("initial.moments", "values must be finite"));
        }
        Ok(s)
    }

    /// Explicit `[initial.moments]`, if given.
    pub fn initial_moments(&self) -> Result<Option<ReducedState>, CliError> {
        match self.file.initial.as_ref().and_then(|i| i.moments.as_ref()) {
            Some(_) => self.initial_moments_section().map(Some),
            None => Ok(None),
        }
    }

    pub fn kinetic(&self) -> Result<KineticConfig, CliError> {
        let k = require(&self.file.kinetic, "kinetic", self.mode)?;
        let (dt, _) = self.stepping()?;
        let cfg = KineticConfig {
            agent_count: k.agents,
            seed: self.file.seed,
            dt,
            velocity: VelocityProcess {
                theta: k.theta.clone(),
                sigma: k.sigma.clone(),
            },
            kernel: TransactionKernel {
                rate: k.rate,
                amount_scale: k.amount_scale,
                amount_shape: k.amount_shape,
            },
        };
        cfg.validate(self.risks()?).map_err(|e| match e {
            econflow_core::Error::InvalidArgument(msg) => bad("kinetic", msg),
            other => bad("kinetic", other),
        })?;
        Ok(cfg)
    }

    pub fn validate_section(&self) -> ValidateSection {
        self.file.validate.clone().unwrap_or_default()
    }

    pub fn fit_section(&self) -> Result<&FitSection, CliError> {
        require(&self.file.fit, "fit", self.mode)
    }

    pub fn fit_pairs(&self) -> Result<usize, CliError> {
        let fit = self.fit_section()?;
        if let Some(p) = fit.pairs {
            return Ok(p);
        }
        if let Some(g) = &fit.guess {
            return Ok(g.axis.len());
        }
        Ok(self.couplings()?.risks())
    }

    fn fit_guess_section(&self) -> Result<Option<CycleParameters>, CliError> {
        let Some(g) = &self.fit_section()?.guess else {
            return Ok(None);
        };
        let pairs = self.fit_pairs()?;
        if g.axis.len() != pairs {
            return Err(bad(
                "fit.guess.axis",
                format!("needs {pairs} entries, got {}", g.axis.len()),
            ));
        }
        let p = CycleParameters {
            c0: g.c0,
            axes: g
                .axis
                .iter()
                .map(|a| CycleAxis {
                    alpha: a.alpha,
                    beta: a.beta,
                    omega: a.omega,
                    delta: a.delta,
                    zeta: a.zeta,
                    nu: a.nu,
                })
                .collect(),
            kappa: g.kappa,
            gamma: g.gamma,
        };
        if p.to_vector().iter().any(|v| !v.is_finite()) {
            return Err(bad("fit.guess", "values must be finite"));
        }
        Ok(Some(p))
    }

    /// Explicit `[fit.guess]`, if given.
    pub fn fit_guess(&self) -> Result<Option<CycleParameters>, CliError> {
        self.fit_guess_section()
    }

    pub fn fit_input(&self) -> Result<PathBuf, CliError> {
        let p = &self.fit_section()?.input;
        Ok(if p.is_absolute() {
            p.clone()
        } else {
            self.base_dir.join(p)
        })
    }
}
