//! Declarative experiment configurations and their runner.
//!
//! Every experiment maps replica `r` to stream `r` of the master seed and
//! collects results by index, so outputs do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::{
    chaos_oracle, chaos_second_moment, lindeberg_distance, ChaosCoefficients, ContinuumKernel, ContinuumSimulator,
    WeakPinning,
};
use crate::disorder::{eta_transform, log_mgf, sample_field, DisorderField, DisorderSpec, Environment, SiteSet};
use crate::error::{Error, Result};
use crate::marginal::{marginal_scan, theta_blocks, MarginalModel, ThetaOptions};
use crate::partition::{
    continuum_pinning_from_noise, pinning_partition, ContinuumPinningParams, Endpoint, Omega, PolymerMode, PolymerPlan,
};
use crate::renewal::{RenewalLaw, RenewalSpec};
use crate::rng::{SiteId, StreamKey};
use crate::scaling::{critical_point_scan, free_energy_estimate, pure_free_energy, scaling_collapse, spread_ratio};
use crate::stats::{ks_critical_two_sample, ks_two_sample, mean_stderr};
use crate::walk::{WalkLaw, WalkSpec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory receiving result files and the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: OutputConfig,
    pub experiment: Experiment,
}

fn default_tol() -> f64 {
    crate::partition::POLYMER_TOL
}

fn default_levels() -> usize {
    12
}

fn default_explicit() -> usize {
    64
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    Pinning {
        renewal: RenewalSpec,
        #[serde(default)]
        endpoint: Endpoint,
    },
    Polymer {
        walk: WalkSpec,
        #[serde(default = "default_tol")]
        tol: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    PinningZ {
        renewal: RenewalSpec,
        beta: f64,
        h: f64,
        #[serde(rename = "N")]
        n: usize,
        samples: usize,
        #[serde(default)]
        endpoint: Endpoint,
        #[serde(default)]
        disorder: DisorderSpec,
    },
    PolymerZ {
        walk: WalkSpec,
        beta: f64,
        #[serde(rename = "N")]
        n: usize,
        samples: usize,
        #[serde(default)]
        disorder: DisorderSpec,
        #[serde(default = "default_tol")]
        tol: f64,
        /// Endpoint of a point-to-point polymer; point-to-plane when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        endpoint: Option<[i64; 2]>,
    },
    Overlap {
        model: ModelConfig,
        #[serde(rename = "N_grid")]
        n_grid: Vec<usize>,
    },
    ChaosOracleCheck {
        model: ModelConfig,
        beta: f64,
        #[serde(default)]
        h: f64,
        #[serde(rename = "N")]
        n: usize,
        environments: usize,
        #[serde(default)]
        disorder: DisorderSpec,
        #[serde(default = "default_oracle_tol")]
        tolerance: f64,
    },
    Lindeberg {
        renewal: RenewalSpec,
        beta_hat: f64,
        #[serde(default)]
        h_hat: f64,
        #[serde(rename = "N_grid")]
        n_grid: Vec<usize>,
        samples: usize,
        disorder_a: DisorderSpec,
        disorder_b: DisorderSpec,
        #[serde(default = "default_true")]
        coupled: bool,
    },
    ContinuumChaos {
        kernel: ContinuumKernel,
        beta_hat: f64,
        #[serde(default)]
        h_hat: f64,
        t: f64,
        mesh: f64,
        k_max: usize,
        samples: usize,
    },
    MarginalScan {
        model: ModelConfig,
        beta_hat_grid: Vec<f64>,
        #[serde(rename = "N_grid")]
        n_grid: Vec<usize>,
        samples: usize,
        #[serde(default)]
        disorder: DisorderSpec,
    },
    ThetaBlocks {
        model: ModelConfig,
        #[serde(rename = "N")]
        n: usize,
        #[serde(rename = "M")]
        m: usize,
        replicas: usize,
        #[serde(default)]
        disorder: DisorderSpec,
        #[serde(default)]
        beta: f64,
        #[serde(default = "default_explicit")]
        explicit_up_to: usize,
    },
    FreeEnergy {
        renewal: RenewalSpec,
        beta: f64,
        h_grid: Vec<f64>,
        #[serde(rename = "N")]
        n: usize,
        samples: usize,
        #[serde(default)]
        disorder: DisorderSpec,
    },
    CriticalPoint {
        renewal: RenewalSpec,
        beta: f64,
        h_grid: Vec<f64>,
        #[serde(rename = "N")]
        n: usize,
        samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        threshold: Option<f64>,
        #[serde(default = "default_levels")]
        levels: usize,
        #[serde(default)]
        disorder: DisorderSpec,
    },
    ScalingCollapse {
        renewal: RenewalSpec,
        beta_hat: f64,
        h_hat: f64,
        delta_grid: Vec<f64>,
        #[serde(rename = "N_per_delta")]
        n_per_delta: usize,
        samples: usize,
        #[serde(default)]
        disorder: DisorderSpec,
    },
}

fn default_oracle_tol() -> f64 {
    1e-10
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::PinningZ { .. } => "pinning-z",
            Experiment::PolymerZ { .. } => "polymer-z",
            Experiment::Overlap { .. } => "overlap",
            Experiment::ChaosOracleCheck { .. } => "chaos-oracle-check",
            Experiment::Lindeberg { .. } => "lindeberg",
            Experiment::ContinuumChaos { .. } => "continuum-chaos",
            Experiment::MarginalScan { .. } => "marginal-scan",
            Experiment::ThetaBlocks { .. } => "theta-blocks",
            Experiment::FreeEnergy { .. } => "free-energy",
            Experiment::CriticalPoint { .. } => "critical-point",
            Experiment::ScalingCollapse { .. } => "scaling-collapse",
        }
    }
}

/// One value of a result table.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Null,
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            // shortest representation that round-trips
            Cell::Float(v) => write!(f, "{v:?}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Bool(b) => write!(f, "{b}"),
            Cell::Null => Ok(()),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}
impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Null, Into::into)
    }
}

macro_rules! row {
    ($($v:expr),* $(,)?) => { vec![$(Cell::from($v)),*] };
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    fn new(name: &str, columns: &[&str]) -> Self {
        ResultTable {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Column index by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of a column (`NaN` for non-numeric cells).
    pub fn floats(&self, name: &str) -> Vec<f64> {
        let Some(i) = self.column(name) else { return Vec::new() };
        self.rows
            .iter()
            .map(|r| match &r[i] {
                Cell::Float(v) => *v,
                Cell::Int(v) => *v as f64,
                _ => f64::NAN,
            })
            .collect()
    }
}

/// A built-in pass/fail assertion evaluated by an experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunOutput {
    pub tables: Vec<ResultTable>,
    pub checks: Vec<Check>,
}

fn require(cond: bool, path: &str, message: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::validation(path, message))
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    require(v > 0.0 && v.is_finite(), path, format!("must be positive and finite, got {v}"))
}

fn nonnegative(path: &str, v: f64) -> Result<()> {
    require(v >= 0.0 && v.is_finite(), path, format!("must be finite and ≥ 0, got {v}"))
}

fn finite(path: &str, v: f64) -> Result<()> {
    require(v.is_finite(), path, format!("must be finite, got {v}"))
}

fn at_least(path: &str, v: usize, min: usize) -> Result<()> {
    require(v >= min, path, format!("must be at least {min}, got {v}"))
}

fn nonempty<T>(path: &str, v: &[T]) -> Result<()> {
    require(!v.is_empty(), path, "must not be empty")
}

/// Attaches a configuration path to errors raised while building a component.
fn at<T>(path: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Validation { path: inner, message } => {
            let suffix = inner.split('.').next_back().unwrap_or(&inner).to_string();
            Error::validation(format!("{path}.{suffix}"), message)
        }
        // budget overruns are not configuration mistakes
        Error::Resource(m) => Error::Resource(format!("{path}: {m}")),
        other => Error::validation(path, other.to_string()),
    })
}

fn build_renewal(path: &str, spec: &RenewalSpec, horizon: usize) -> Result<RenewalLaw> {
    positive(&format!("{path}.alpha"), spec.alpha)?;
    require(
        spec.n_max >= horizon,
        &format!("{path}.N_max"),
        format!("must cover the horizon {horizon}, got {}", spec.n_max),
    )?;
    at(&format!("{path}.L"), spec.l.parse::<crate::renewal::SlowlyVarying>().map(|_| ()))?;
    at(path, spec.build())
}

fn build_walk(path: &str, spec: &WalkSpec) -> Result<WalkLaw> {
    if let Some(a) = spec.alpha {
        positive(&format!("{path}.alpha"), a)?;
    }
    at(path, spec.build())
}

fn tolerance(path: &str, tol: f64) -> Result<()> {
    require(tol > 0.0 && tol <= 1e-3, path, format!("must lie in (0, 1e-3], got {tol}"))
}

fn max_of(grid: &[usize]) -> usize {
    grid.iter().copied().max().unwrap_or(0)
}

impl ModelConfig {
    fn build(&self, path: &str, horizon: usize) -> Result<MarginalModel> {
        match self {
            ModelConfig::Pinning { renewal, .. } => Ok(MarginalModel::Pinning {
                law: build_renewal(&format!("{path}.renewal"), renewal, horizon)?,
            }),
            ModelConfig::Polymer { walk, tol } => {
                tolerance(&format!("{path}.tol"), *tol)?;
                Ok(MarginalModel::Polymer {
                    walk: build_walk(&format!("{path}.walk"), walk)?,
                    tol: *tol,
                })
            }
        }
    }
}

impl ExperimentConfig {
    /// Checks every field against the preconditions of the module it feeds.
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.threads {
            at_least("threads", t, 1)?;
        }
        self.experiment.validate("experiment")
    }
}

impl Experiment {
    pub fn validate(&self, p: &str) -> Result<()> {
        let f = |name: &str| format!("{p}.{name}");
        match self {
            Experiment::PinningZ { renewal, beta, h, n, samples, .. } => {
                nonnegative(&f("beta"), *beta)?;
                finite(&f("h"), *h)?;
                at_least(&f("N"), *n, 1)?;
                at_least(&f("samples"), *samples, 1)?;
                build_renewal(&f("renewal"), renewal, *n)?;
            }
            Experiment::PolymerZ { walk, beta, n, samples, tol, .. } => {
                nonnegative(&f("beta"), *beta)?;
                at_least(&f("N"), *n, 1)?;
                at_least(&f("samples"), *samples, 1)?;
                tolerance(&f("tol"), *tol)?;
                build_walk(&f("walk"), walk)?;
            }
            Experiment::Overlap { model, n_grid } => {
                nonempty(&f("N_grid"), n_grid)?;
                require(n_grid.iter().all(|&n| n >= 1), &f("N_grid"), "entries must be ≥ 1")?;
                model.build(&f("model"), max_of(n_grid))?;
            }
            Experiment::ChaosOracleCheck { model, beta, h, n, environments, tolerance, .. } => {
                nonnegative(&f("beta"), *beta)?;
                finite(&f("h"), *h)?;
                at_least(&f("N"), *n, 1)?;
                require(*n <= crate::chaos::ORACLE_MAX_N, &f("N"), format!("must be ≤ {}", crate::chaos::ORACLE_MAX_N))?;
                at_least(&f("environments"), *environments, 1)?;
                positive(&f("tolerance"), *tolerance)?;
                model.build(&f("model"), *n)?;
            }
            Experiment::Lindeberg { renewal, beta_hat, h_hat, n_grid, samples, .. } => {
                nonnegative(&f("beta_hat"), *beta_hat)?;
                finite(&f("h_hat"), *h_hat)?;
                nonempty(&f("N_grid"), n_grid)?;
                require(n_grid.iter().all(|&n| n >= 1), &f("N_grid"), "entries must be ≥ 1")?;
                at_least(&f("samples"), *samples, 2)?;
                let law = build_renewal(&f("renewal"), renewal, max_of(n_grid))?;
                at(&f("renewal.alpha"), crate::chaos::weak_disorder_scaling(&law, *beta_hat, *h_hat, 1).map(|_| ()))?;
            }
            Experiment::ContinuumChaos { kernel, beta_hat, h_hat, t, mesh, k_max, samples } => {
                match kernel {
                    ContinuumKernel::Alpha { alpha } => require(
                        *alpha > 0.5 && *alpha < 1.0,
                        &f("kernel.alpha"),
                        format!("must lie in (1/2, 1), got {alpha}"),
                    )?,
                    ContinuumKernel::FiniteMean { m } => positive(&f("kernel.m"), *m)?,
                }
                nonnegative(&f("beta_hat"), *beta_hat)?;
                finite(&f("h_hat"), *h_hat)?;
                positive(&f("t"), *t)?;
                positive(&f("mesh"), *mesh)?;
                require(*mesh <= *t, &f("mesh"), "must not exceed t")?;
                at_least(&f("k_max"), *k_max, 1)?;
                at_least(&f("samples"), *samples, 4)?;
                at(&f("mesh"), ContinuumSimulator::new(*kernel, *beta_hat, *h_hat, *t, *mesh, *k_max).map(|_| ()))?;
            }
            Experiment::MarginalScan { model, beta_hat_grid, n_grid, samples, .. } => {
                nonempty(&f("beta_hat_grid"), beta_hat_grid)?;
                for (i, b) in beta_hat_grid.iter().enumerate() {
                    nonnegative(&format!("{p}.beta_hat_grid[{i}]"), *b)?;
                }
                nonempty(&f("N_grid"), n_grid)?;
                require(n_grid.iter().all(|&n| n >= 1), &f("N_grid"), "entries must be ≥ 1")?;
                at_least(&f("samples"), *samples, 4)?;
                model.build(&f("model"), max_of(n_grid))?;
            }
            Experiment::ThetaBlocks { model, n, m, replicas, beta, .. } => {
                at_least(&f("M"), *m, 1)?;
                at_least(&f("replicas"), *replicas, 4)?;
                nonnegative(&f("beta"), *beta)?;
                at(&f("N"), crate::marginal::theta_block_bounds(*n, *m).map(|_| ()))?;
                model.build(&f("model"), *n)?;
            }
            Experiment::FreeEnergy { renewal, beta, h_grid, n, samples, .. } => {
                nonnegative(&f("beta"), *beta)?;
                nonempty(&f("h_grid"), h_grid)?;
                for (i, h) in h_grid.iter().enumerate() {
                    finite(&format!("{p}.h_grid[{i}]"), *h)?;
                }
                at_least(&f("N"), *n, crate::scaling::FREE_ENERGY_MIN_N)?;
                at_least(&f("samples"), *samples, 2)?;
                build_renewal(&f("renewal"), renewal, *n)?;
            }
            Experiment::CriticalPoint { renewal, beta, h_grid, n, samples, threshold, .. } => {
                nonnegative(&f("beta"), *beta)?;
                require(
                    h_grid.len() >= 2 && h_grid.windows(2).all(|w| w[1] > w[0]),
                    &f("h_grid"),
                    "must be increasing with at least two points",
                )?;
                at_least(&f("N"), *n, crate::scaling::FREE_ENERGY_MIN_N)?;
                at_least(&f("samples"), *samples, 2)?;
                if let Some(t) = threshold {
                    nonnegative(&f("threshold"), *t)?;
                }
                build_renewal(&f("renewal"), renewal, *n)?;
            }
            Experiment::ScalingCollapse { renewal, beta_hat, h_hat, delta_grid, n_per_delta, samples, .. } => {
                nonnegative(&f("beta_hat"), *beta_hat)?;
                finite(&f("h_hat"), *h_hat)?;
                require(
                    !delta_grid.is_empty()
                        && delta_grid.iter().all(|d| *d > 0.0 && *d < 1.0)
                        && delta_grid.windows(2).all(|w| w[1] < w[0]),
                    &f("delta_grid"),
                    "must be a nonempty decreasing sequence in (0, 1)",
                )?;
                at_least(&f("N_per_delta"), *n_per_delta, 1)?;
                at_least(&f("samples"), *samples, 2)?;
                positive(&f("renewal.alpha"), renewal.alpha)?;
                require(
                    renewal.alpha > 0.5 && renewal.alpha < 1.0,
                    &f("renewal.alpha"),
                    format!("must lie in (1/2, 1), got {}", renewal.alpha),
                )?;
                let smallest = delta_grid.iter().cloned().fold(1.0, f64::min);
                let horizon = (*n_per_delta as f64 / smallest).round() as usize;
                at_least(&f("N_per_delta"), horizon, crate::scaling::FREE_ENERGY_MIN_N)?;
                build_renewal(&f("renewal"), renewal, horizon)?;
            }
        }
        Ok(())
    }
}

/// Validates and runs an experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let seed = config.master_seed;
    let mut checks = Vec::new();
    let tables = match &config.experiment {
        Experiment::PinningZ { renewal, beta, h, n, samples, endpoint, disorder } => {
            let law = build_renewal("experiment.renewal", renewal, *n)?;
            let plan = crate::partition::PinningPlan::new(&law, *n)?;
            let sites = SiteSet::line(*n);
            let values: Vec<f64> = (0..*samples)
                .into_par_iter()
                .map(|r| {
                    let field = sample_field(disorder, &sites, StreamKey::replica(seed, r as u64))?;
                    plan.log_partition(&field.values, *beta, *h, *endpoint)
                })
                .collect::<Result<_>>()?;
            let mut t = ResultTable::new("pinning_z", &["replica", "N", "beta", "h", "log_Z", "Z"]);
            for (r, lz) in values.into_iter().enumerate() {
                t.push(row![r, *n, *beta, *h, lz, lz.exp()]);
            }
            vec![t]
        }
        Experiment::PolymerZ { walk, beta, n, samples, disorder, tol, endpoint } => {
            let walk = build_walk("experiment.walk", walk)?;
            let plan = PolymerPlan::new(&walk, *n, *tol)?;
            let shift = log_mgf(disorder, *beta)?;
            let mode = endpoint.map_or(PolymerMode::PointToPlane, PolymerMode::PointToPoint);
            let values: Vec<f64> = (0..*samples)
                .into_par_iter()
                .map(|r| {
                    let env = Environment::new(*disorder, StreamKey::replica(seed, r as u64));
                    plan.log_partition(&Omega::Lazy(&env), *beta, shift, mode)
                })
                .collect::<Result<_>>()?;
            let mut t = ResultTable::new("polymer_z", &["replica", "N", "beta", "log_Z", "Z"]);
            for (r, lz) in values.into_iter().enumerate() {
                t.push(row![r, *n, *beta, lz, lz.exp()]);
            }
            vec![t]
        }
        Experiment::Overlap { model, n_grid } => {
            let model = model.build("experiment.model", max_of(n_grid))?;
            let mut t = ResultTable::new("overlap", &["N", "R_N"]);
            for &n in n_grid {
                t.push(row![n, model.overlap(n)?]);
            }
            vec![t]
        }
        Experiment::ChaosOracleCheck { model, beta, h, n, environments, disorder, tolerance } => {
            let (table, worst) = oracle_check(model, *beta, *h, *n, *environments, disorder, seed)?;
            checks.push(Check {
                name: "max relative error".into(),
                value: worst,
                threshold: *tolerance,
                passed: worst <= *tolerance,
            });
            vec![table]
        }
        Experiment::Lindeberg { renewal, beta_hat, h_hat, n_grid, samples, disorder_a, disorder_b, coupled } => {
            let law = build_renewal("experiment.renewal", renewal, max_of(n_grid))?;
            let model = WeakPinning { law, beta_hat: *beta_hat, h_hat: *h_hat, endpoint: Endpoint::Free };
            let mut t = ResultTable::new("lindeberg", &["N", "ks_distance", "ks_critical_1pct"]);
            for &n in n_grid {
                let d = lindeberg_distance(&model, disorder_a, disorder_b, n, *samples, StreamKey::new(seed, 0), *coupled)?;
                t.push(row![n, d, ks_critical_two_sample(*samples, *samples)]);
            }
            vec![t]
        }
        Experiment::ContinuumChaos { kernel, beta_hat, h_hat, t, mesh, k_max, samples } => {
            continuum_experiment(kernel, *beta_hat, *h_hat, *t, *mesh, *k_max, *samples, seed)?
        }
        Experiment::MarginalScan { model, beta_hat_grid, n_grid, samples, disorder } => {
            let built = model.build("experiment.model", max_of(n_grid))?;
            let rows = marginal_scan(&built, disorder, beta_hat_grid, n_grid, *samples, seed)?;
            let mut t = ResultTable::new(
                "marginal_scan",
                &[
                    "beta_hat", "N", "R_N", "beta_N", "mean_Z", "stderr_mean_Z", "var_Z", "E_Z2", "stderr_E_Z2",
                    "exact_E_Z2", "median_Z", "frac_below_0.01", "ks_lognormal",
                ],
            );
            for r in rows {
                t.push(row![
                    r.beta_hat, r.n, r.overlap, r.beta_n, r.mean_z, r.stderr_mean_z, r.var_z, r.e_z2, r.stderr_e_z2,
                    r.exact_e_z2, r.median_z, r.frac_below_001, r.ks_lognormal
                ]);
            }
            vec![t]
        }
        Experiment::ThetaBlocks { model, n, m, replicas, disorder, beta, explicit_up_to } => {
            let built = model.build("experiment.model", *n)?;
            let options = ThetaOptions { beta: *beta, explicit_up_to: *explicit_up_to };
            let stats = theta_blocks(&built, disorder, *n, *m, *replicas, seed, options)?;
            let mut blocks = ResultTable::new(
                "theta_blocks",
                &["block", "lo", "hi", "oracle_var", "mean", "var", "stderr_var", "skew", "kurt"],
            );
            for b in &stats.blocks {
                let mo = &b.moments;
                blocks.push(row![b.block, b.lo, b.hi, b.oracle_variance, mo.mean, mo.variance, mo.stderr_variance, mo.skewness, mo.kurtosis]);
            }
            let mut corr = ResultTable::new("theta_correlations", &["i", "j", "correlation", "stderr"]);
            for c in &stats.correlations {
                corr.push(row![c.i, c.j, c.correlation, c.stderr]);
            }
            vec![blocks, corr]
        }
        Experiment::FreeEnergy { renewal, beta, h_grid, n, samples, disorder } => {
            let law = build_renewal("experiment.renewal", renewal, *n)?;
            let mut t = ResultTable::new(
                "free_energy",
                &["beta", "h", "N", "f_hat", "stderr", "f_raw", "f_doubling", "stderr_doubling", "f_pure"],
            );
            for &h in h_grid {
                let e = free_energy_estimate(&law, disorder, *beta, h, *n, *samples, seed)?;
                let pure = if *beta == 0.0 { Some(pure_free_energy(&law, h)?) } else { None };
                t.push(row![e.beta, e.h, e.n, e.f_hat, e.stderr, e.f_raw, e.f_doubling, e.stderr_doubling, pure]);
            }
            vec![t]
        }
        Experiment::CriticalPoint { renewal, beta, h_grid, n, samples, threshold, levels, disorder } => {
            let law = build_renewal("experiment.renewal", renewal, *n)?;
            let est = critical_point_scan(&law, disorder, *beta, h_grid, *n, *samples, *threshold, *levels, seed)?;
            let mut evals = ResultTable::new("critical_point_evaluations", &["beta", "h", "N", "f_hat", "stderr"]);
            let mut sorted = est.evaluations.clone();
            sorted.sort_by(|a, b| a.h.total_cmp(&b.h));
            for e in sorted {
                evals.push(row![e.beta, e.h, e.n, e.f_hat, e.stderr]);
            }
            let mut summary = ResultTable::new("critical_point", &["beta", "h_c_hat", "h_lo", "h_hi", "threshold"]);
            summary.push(row![est.beta, est.h_c_hat, est.bracket.0, est.bracket.1, est.threshold]);
            vec![summary, evals]
        }
        Experiment::ScalingCollapse { renewal, beta_hat, h_hat, delta_grid, n_per_delta, samples, disorder } => {
            let smallest = delta_grid.iter().cloned().fold(1.0, f64::min);
            let horizon = (*n_per_delta as f64 / smallest).round() as usize;
            let law = build_renewal("experiment.renewal", renewal, horizon)?;
            let rows = scaling_collapse(&law, disorder, *beta_hat, *h_hat, delta_grid, *n_per_delta, *samples, seed)?;
            let mut t = ResultTable::new(
                "scaling_collapse",
                &["delta", "N", "beta", "h", "f_hat", "stderr", "collapsed_value", "collapsed_stderr"],
            );
            for r in &rows {
                t.push(row![r.delta, r.n, r.beta, r.h, r.f_hat, r.stderr, r.collapsed_value, r.collapsed_stderr]);
            }
            let values: Vec<f64> = rows.iter().map(|r| r.collapsed_value).collect();
            let mut s = ResultTable::new("scaling_collapse_spread", &["max_over_min"]);
            s.push(row![spread_ratio(&values)]);
            vec![t, s]
        }
    };
    Ok(RunOutput { tables, checks })
}

/// Exhaustive chaos sums against the transfer recursions.
fn oracle_check(
    model: &ModelConfig,
    beta: f64,
    h: f64,
    n: usize,
    environments: usize,
    disorder: &DisorderSpec,
    seed: u64,
) -> Result<(ResultTable, f64)> {
    let mut t = ResultTable::new("chaos_oracle_check", &["replica", "oracle", "transfer", "rel_error"]);
    let pairs: Vec<(f64, f64)> = match model {
        ModelConfig::Pinning { renewal, endpoint } => {
            let law = build_renewal("experiment.model.renewal", renewal, n)?;
            let psi = ChaosCoefficients::pinning(&law, n, *endpoint)?;
            (0..environments)
                .into_par_iter()
                .map(|r| {
                    let field = sample_field(disorder, &SiteSet::line(n), StreamKey::replica(seed, r as u64))?;
                    let eta = eta_transform(&field, beta, h)?;
                    let z = pinning_partition(&law, &field, beta, h, n, *endpoint)?.value;
                    Ok((chaos_oracle(&psi, &eta)?, z))
                })
                .collect::<Result<_>>()?
        }
        ModelConfig::Polymer { walk, .. } => {
            let walk = build_walk("experiment.model.walk", walk)?;
            let psi = ChaosCoefficients::polymer(&walk, n)?;
            let sites = SiteSet::List(light_cone(&walk, n));
            // full windows: exact for horizons this short
            let plan = PolymerPlan::new(&walk, n, 1e-6)?;
            (0..environments)
                .into_par_iter()
                .map(|r| {
                    let field = sample_field(disorder, &sites, StreamKey::replica(seed, r as u64))?;
                    let eta = eta_transform(&field, beta, h)?;
                    let z = polymer_z_field(&plan, &field, beta, h)?;
                    Ok((chaos_oracle(&psi, &eta)?, z))
                })
                .collect::<Result<_>>()?
        }
    };
    let mut worst = 0.0f64;
    for (r, (a, b)) in pairs.into_iter().enumerate() {
        let rel = ((a - b) / b).abs();
        worst = worst.max(rel);
        t.push(row![r, a, b, rel]);
    }
    Ok((t, worst))
}

fn polymer_z_field(plan: &PolymerPlan, field: &DisorderField, beta: f64, h: f64) -> Result<f64> {
    Ok(plan.log_partition(&Omega::Field(field), beta, -h, PolymerMode::PointToPlane)?.exp())
}

/// Sites reachable by a simple or stable walk in `1..=n` steps (stable walks
/// use the window `|x| ≤ n·radius`).
fn light_cone(walk: &WalkLaw, n: usize) -> Vec<SiteId> {
    let mut out = Vec::new();
    for t in 1..=n {
        let r = (t * walk.step_radius) as i64;
        for x1 in -r..=r {
            if walk.dim() == 1 {
                if walk.period == 1 || (x1 + t as i64).rem_euclid(2) == 0 {
                    out.push(SiteId::lattice1(t, x1));
                }
            } else {
                for x2 in -r..=r {
                    if (x1 + x2 + t as i64).rem_euclid(2) == 0 && x1.abs() + x2.abs() <= r {
                        out.push(SiteId::lattice2(t, x1, x2));
                    }
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn continuum_experiment(
    kernel: &ContinuumKernel,
    beta_hat: f64,
    h_hat: f64,
    t: f64,
    mesh: f64,
    k_max: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<ResultTable>> {
    let sim = ContinuumSimulator::new(*kernel, beta_hat, h_hat, t, mesh, k_max)?;
    let draws: Vec<crate::chaos::ChaosSample> = (0..samples)
        .into_par_iter()
        .map(|r| sim.sample(StreamKey::replica(seed, r as u64)))
        .collect();
    let z: Vec<f64> = draws.iter().map(|s| s.value()).collect();
    let mut terms = ResultTable::new("continuum_chaos_terms", &["k", "mean", "second_moment", "series_term"]);
    let series = if h_hat == 0.0 {
        let k_series = match kernel {
            ContinuumKernel::Alpha { .. } => k_max.min(crate::chaos::QUADRATURE_MAX_K),
            ContinuumKernel::FiniteMean { .. } => k_max,
        };
        Some(chaos_second_moment(kernel, beta_hat, 0.0, t, k_series)?)
    } else {
        None
    };
    for k in 0..=k_max {
        let col: Vec<f64> = draws.iter().map(|s| s.terms[k]).collect();
        let sq: Vec<f64> = col.iter().map(|v| v * v).collect();
        let term = series.as_ref().and_then(|(_, rep)| rep.terms.get(k).copied());
        terms.push(row![k, mean_stderr(&col).0, mean_stderr(&sq).0, term]);
    }
    let squares: Vec<f64> = z.iter().map(|v| v * v).collect();
    let (mean_z, se_mean) = mean_stderr(&z);
    let (e_z2, se_z2) = mean_stderr(&squares);
    let mut summary = ResultTable::new(
        "continuum_chaos",
        &[
            "samples", "mean_Z", "stderr_mean_Z", "E_Z2", "stderr_E_Z2", "series_E_Z2", "series_tail_bound",
            "closed_form_E_Z2", "ks_closed_form",
        ],
    );
    let (closed, ks) = match kernel {
        ContinuumKernel::FiniteMean { m } => {
            let params = ContinuumPinningParams { beta_hat, h_hat, t, mean_interarrival: *m };
            // driven by the same white noise, so only discretization and
            // truncation separate the two samples
            let reference: Vec<f64> = draws.iter().map(|d| continuum_pinning_from_noise(&params, d.noise)).collect();
            (Some(params.second_moment()), Some(ks_two_sample(&z, &reference)?))
        }
        ContinuumKernel::Alpha { .. } => (None, None),
    };
    summary.push(row![
        samples,
        mean_z,
        se_mean,
        e_z2,
        se_z2,
        series.as_ref().map(|s| s.0),
        series.as_ref().map(|s| s.1.tail_bound),
        closed,
        ks
    ]);
    Ok(vec![summary, terms])
}

/// Canonical ordering key for comparing outputs across runs.
pub fn sorted_rows(table: &ResultTable) -> Vec<String> {
    let mut rows: Vec<String> = table
        .rows
        .iter()
        .map(|r| r.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","))
        .collect();
    rows.sort();
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pinning_spec(alpha: f64) -> RenewalSpec {
        RenewalSpec { alpha, l: "constant".into(), n_max: 64 }
    }

    #[test]
    fn negative_alpha_names_the_field() {
        let cfg = ExperimentConfig {
            master_seed: 1,
            threads: None,
            output: OutputConfig::default(),
            experiment: Experiment::PinningZ {
                renewal: pinning_spec(-1.0),
                beta: 0.1,
                h: 0.0,
                n: 16,
                samples: 2,
                endpoint: Endpoint::Free,
                disorder: DisorderSpec::gaussian(),
            },
        };
        match cfg.validate() {
            Err(Error::Validation { path, .. }) => assert_eq!(path, "experiment.renewal.alpha"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pinning_oracle_check_passes() {
        let cfg = ExperimentConfig {
            master_seed: 3,
            threads: None,
            output: OutputConfig::default(),
            experiment: Experiment::ChaosOracleCheck {
                model: ModelConfig::Pinning { renewal: pinning_spec(0.6), endpoint: Endpoint::Constrained },
                beta: 0.4,
                h: -0.1,
                n: 8,
                environments: 5,
                disorder: DisorderSpec::rademacher(),
                tolerance: 1e-10,
            },
        };
        let out = run_experiment(&cfg).unwrap();
        assert!(out.checks[0].passed, "{:?}", out.checks);
    }

    #[test]
    fn polymer_oracle_check_passes() {
        let cfg = ExperimentConfig {
            master_seed: 3,
            threads: None,
            output: OutputConfig::default(),
            experiment: Experiment::ChaosOracleCheck {
                model: ModelConfig::Polymer {
                    walk: WalkSpec { family: "ssrw-2d".into(), alpha: None, x_max: None },
                    tol: 1e-6,
                },
                beta: 0.4,
                h: 0.05,
                n: 4,
                environments: 3,
                disorder: DisorderSpec::gaussian(),
                tolerance: 1e-10,
            },
        };
        let out = run_experiment(&cfg).unwrap();
        assert!(out.checks[0].passed, "{:?}", out.checks);
    }

    #[test]
    fn float_cells_round_trip() {
        let c = Cell::from(0.1 + 0.2);
        assert_eq!(c.to_string().parse::<f64>().unwrap(), 0.1 + 0.2);
        assert_eq!(Cell::from(None::<f64>).to_string(), "");
    }
}
