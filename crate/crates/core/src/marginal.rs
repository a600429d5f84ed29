//! Marginally relevant models at `β_N = β̂/√R_N`: the log-normal limit,
//! moment and median scans, Θ-block coarse graining and the variance ladder.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{log_mgf, sample_field, DisorderSpec, Environment, SiteSet};
use crate::error::{Error, Result};
use crate::partition::{Endpoint, Omega, PinningPlan, PolymerMode, PolymerPlan};
use crate::renewal::{renewal_mass, RenewalLaw};
use crate::rng::{SiteId, StreamKey};
use crate::stats::{correlation, ks_statistic, mean_stderr, moment_summary, normal_cdf, MomentAccumulator, MomentSummary};
use crate::walk::{kernel_column, polymer_overlap, ssrw_square_sums, WalkLaw};

/// Limit law of `Z_{N, β_N}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LognormalLimit {
    pub beta_hat: f64,
    /// `log(1/(1 − β̂²))`; infinite once degenerate.
    pub sigma_sq: f64,
    /// Point mass at zero (`β̂ ≥ 1`).
    pub degenerate: bool,
}

impl LognormalLimit {
    /// `E[Z²] = 1/(1 − β̂²)`, infinite when degenerate.
    pub fn second_moment(&self) -> f64 {
        self.sigma_sq.exp()
    }

    /// CDF of `log Z`, a normal law with mean `−σ²/2`.
    pub fn log_cdf(&self, x: f64) -> f64 {
        if self.sigma_sq == 0.0 {
            return if x >= 0.0 { 1.0 } else { 0.0 };
        }
        normal_cdf(x, -0.5 * self.sigma_sq, self.sigma_sq.sqrt())
    }
}

pub fn limit_lognormal_params(beta_hat: f64) -> Result<LognormalLimit> {
    if !(beta_hat >= 0.0) || !beta_hat.is_finite() {
        return Err(Error::Domain(format!("beta_hat must be finite and ≥ 0, got {beta_hat}")));
    }
    let degenerate = beta_hat >= 1.0;
    let sigma_sq = if degenerate { f64::INFINITY } else { -(-beta_hat * beta_hat).ln_1p() };
    Ok(LognormalLimit { beta_hat, sigma_sq, degenerate })
}

pub fn marginal_beta(beta_hat: f64, overlap: f64) -> Result<f64> {
    if !(overlap > 0.0) {
        return Err(Error::Domain(format!("overlap R_N must be positive, got {overlap}")));
    }
    if !(beta_hat >= 0.0) {
        return Err(Error::Domain(format!("beta_hat must be ≥ 0, got {beta_hat}")));
    }
    Ok(beta_hat / overlap.sqrt())
}

/// Model whose partition functions are scanned.
#[derive(Clone, Debug)]
pub enum MarginalModel {
    Pinning { law: RenewalLaw },
    Polymer { walk: WalkLaw, tol: f64 },
}

impl MarginalModel {
    /// `R_N`.
    pub fn overlap(&self, n: usize) -> Result<f64> {
        match self {
            MarginalModel::Pinning { law } => crate::renewal::pinning_overlap(law, n),
            MarginalModel::Polymer { walk, tol } => polymer_overlap(walk, n, *tol),
        }
    }

    /// Meeting probabilities of two replicas at each time, `k(0..=N)`.
    pub fn meeting_kernel(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            MarginalModel::Pinning { law } => Ok(renewal_mass(law, n)?.into_iter().map(|u| u * u).collect()),
            MarginalModel::Polymer { walk, tol } => {
                if walk.is_ssrw() {
                    ssrw_square_sums(walk, n)
                } else {
                    let mut out = vec![1.0];
                    for m in 1..=n {
                        out.push(kernel_column(walk, m, *tol)?.square_sum());
                    }
                    Ok(out)
                }
            }
        }
    }

    /// `Z` of replicas `0..samples` at `(β, shift)`, where sites carry
    /// weight `e^{βω − shift}`; replica `r` uses stream `r` of `seed`.
    pub fn sample_z(&self, spec: &DisorderSpec, beta: f64, shift: f64, n: usize, samples: usize, seed: u64) -> Result<Vec<f64>> {
        match self {
            MarginalModel::Pinning { law } => {
                let plan = PinningPlan::new(law, n)?;
                let sites = SiteSet::line(n);
                (0..samples)
                    .into_par_iter()
                    .map(|r| {
                        let field = sample_field(spec, &sites, StreamKey::replica(seed, r as u64))?;
                        Ok(plan.log_partition(&field.values, beta, -shift, Endpoint::Free)?.exp())
                    })
                    .collect()
            }
            MarginalModel::Polymer { walk, tol } => {
                let plan = PolymerPlan::new(walk, n, *tol)?;
                (0..samples)
                    .into_par_iter()
                    .map(|r| {
                        let env = Environment::new(*spec, StreamKey::replica(seed, r as u64));
                        Ok(plan.log_partition(&Omega::Lazy(&env), beta, shift, PolymerMode::PointToPlane)?.exp())
                    })
                    .collect()
            }
        }
    }
}

/// One `(β̂, N)` point of a marginal scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalRow {
    pub beta_hat: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub overlap: f64,
    pub beta_n: f64,
    pub mean_z: f64,
    pub stderr_mean_z: f64,
    pub var_z: f64,
    pub e_z2: f64,
    pub stderr_e_z2: f64,
    /// `E[Z²]` of the finite system, from the replica recursion.
    pub exact_e_z2: f64,
    pub median_z: f64,
    pub frac_below_001: f64,
    /// KS distance of `log Z` to the limit law; `None` when degenerate.
    pub ks_lognormal: Option<f64>,
}

/// Evaluates every `(β̂, N)` of the grids on `samples` environments, centered
/// by `h = −M(β_N)`. The same replica streams are reused across grid points.
pub fn marginal_scan(
    model: &MarginalModel,
    spec: &DisorderSpec,
    beta_hat_grid: &[f64],
    n_grid: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<MarginalRow>> {
    if beta_hat_grid.is_empty() || n_grid.is_empty() {
        return Err(Error::Input("marginal scan needs nonempty grids".into()));
    }
    if samples < 4 {
        return Err(Error::Input("marginal scan needs at least 4 samples".into()));
    }
    let mut rows = Vec::new();
    for &n in n_grid {
        let overlap = model.overlap(n)?;
        let meet = model.meeting_kernel(n)?;
        for &beta_hat in beta_hat_grid {
            let limit = limit_lognormal_params(beta_hat)?;
            let beta_n = marginal_beta(beta_hat, overlap)?;
            let shift = log_mgf(spec, beta_n)?;
            let z = model.sample_z(spec, beta_n, shift, n, samples, seed)?;
            rows.push(summarize(beta_hat, n, overlap, beta_n, &z, &limit, spec, &meet)?);
        }
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    beta_hat: f64,
    n: usize,
    overlap: f64,
    beta_n: f64,
    z: &[f64],
    limit: &LognormalLimit,
    spec: &DisorderSpec,
    meet: &[f64],
) -> Result<MarginalRow> {
    let summary = moment_summary(&MomentAccumulator::from_slice(z))?;
    let squares: Vec<f64> = z.iter().map(|v| v * v).collect();
    let (e_z2, stderr_e_z2) = mean_stderr(&squares);
    let cdf = crate::stats::EmpiricalCdf::new(z)?;
    let below = z.iter().filter(|&&v| v < 0.01).count() as f64 / z.len() as f64;
    let ks_lognormal = if limit.degenerate {
        None
    } else {
        let logs: Vec<f64> = z.iter().map(|v| v.ln()).collect();
        Some(ks_statistic(&logs, |x| limit.log_cdf(x))?)
    };
    let v = spec.replica_exponent(beta_n)?.exp_m1();
    Ok(MarginalRow {
        beta_hat,
        n,
        overlap,
        beta_n,
        mean_z: summary.mean,
        stderr_mean_z: summary.stderr_mean,
        var_z: summary.variance,
        e_z2,
        stderr_e_z2,
        exact_e_z2: crate::partition::replica_second_moment(meet, v, n),
        median_z: cdf.median(),
        frac_below_001: below,
        ks_lognormal,
    })
}

/// Moments of one coarse-grained block `Θ_i` over replicas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub block: usize,
    /// Times `lo < n ≤ hi` of the block.
    pub lo: usize,
    pub hi: usize,
    /// Exact variance from the kernel tables.
    pub oracle_variance: f64,
    pub moments: MomentSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockCorrelation {
    pub i: usize,
    pub j: usize,
    pub correlation: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaBlockStats {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub overlap: f64,
    pub blocks: Vec<BlockSummary>,
    pub correlations: Vec<BlockCorrelation>,
}

/// Options of a Θ-block experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaOptions {
    /// `β = 0` uses `η = ω`; otherwise `η = (e^{βω − M(β)} − 1)/sd`.
    pub beta: f64,
    /// Polymer times above this are summed as one Gaussian per block with the
    /// exact slice variances (sums of many independent sites).
    pub explicit_up_to: usize,
}

impl Default for ThetaOptions {
    fn default() -> Self {
        ThetaOptions { beta: 0.0, explicit_up_to: 64 }
    }
}

/// Block boundaries `⌊N^{i/M}⌋`, starting from 0.
pub fn theta_block_bounds(n: usize, m: usize) -> Result<Vec<usize>> {
    if m == 0 || n < 2 {
        return Err(Error::Input("coarse graining needs M ≥ 1 and N ≥ 2".into()));
    }
    let mut bounds = vec![0];
    for i in 1..=m {
        let b = if i == m { n } else { (n as f64).powf(i as f64 / m as f64).floor() as usize };
        if b <= *bounds.last().unwrap() {
            return Err(Error::Input(format!(
                "block {i} of N = {n} with M = {m} is empty; increase N or decrease M"
            )));
        }
        bounds.push(b);
    }
    Ok(bounds)
}

/// `Θ_i = (M/R_N)^{1/2} Σ_{n ∈ I_i} Σ_x q_n(x) η_{(n,x)}` for each replica.
///
/// The normalization by `R_N` makes the blocks asymptotically of unit
/// variance for every marginal model.
pub fn theta_blocks(
    model: &MarginalModel,
    spec: &DisorderSpec,
    n: usize,
    m: usize,
    replicas: usize,
    seed: u64,
    options: ThetaOptions,
) -> Result<ThetaBlockStats> {
    let bounds = theta_block_bounds(n, m)?;
    if replicas < 4 {
        return Err(Error::Input("Θ-block statistics need at least 4 replicas".into()));
    }
    let meet = model.meeting_kernel(n)?;
    let overlap: f64 = meet[1..].iter().sum();
    let norm = (m as f64 / overlap).sqrt();
    let (beta, shift, sd) = if options.beta == 0.0 {
        (0.0, 0.0, 1.0)
    } else {
        let shift = log_mgf(spec, options.beta)?;
        let var = spec.replica_exponent(options.beta)?.exp_m1();
        (options.beta, shift, var.sqrt())
    };
    let block_of = |t: usize| bounds.partition_point(|&b| b < t) - 1;

    // explicit (site, weight, block) terms and aggregated variances per block
    let mut explicit: Vec<(SiteId, f64, usize)> = Vec::new();
    let mut aggregated = vec![0.0; m];
    match model {
        MarginalModel::Pinning { law } => {
            let u = renewal_mass(law, n)?;
            for t in 1..=n {
                explicit.push((SiteId(t as u64), u[t], block_of(t)));
            }
        }
        MarginalModel::Polymer { walk, tol } => {
            if !walk.is_ssrw() {
                return Err(Error::Domain("Θ blocks are implemented for the simple walks".into()));
            }
            let cut = options.explicit_up_to.min(n);
            for t in 1..=cut {
                let col = kernel_column(walk, t, *tol)?;
                let r = col.radius as i64;
                let side = 2 * col.radius + 1;
                for (idx, &q) in col.values.iter().enumerate() {
                    if q == 0.0 {
                        continue;
                    }
                    let site = if col.dim == 1 {
                        SiteId::lattice1(t, idx as i64 - r)
                    } else {
                        SiteId::lattice2(t, (idx / side) as i64 - r, (idx % side) as i64 - r)
                    };
                    explicit.push((site, q, block_of(t)));
                }
            }
            for t in cut + 1..=n {
                aggregated[block_of(t)] += meet[t];
            }
        }
    }
    let mut oracle = vec![0.0; m];
    for t in 1..=n {
        oracle[block_of(t)] += meet[t] * norm * norm;
    }

    let gauss_key = StreamKey::new(seed, 0).derive(0x7e7a);
    let samples: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let env = Environment::new(*spec, StreamKey::replica(seed, r as u64));
            let mut reader = env.reader();
            let mut theta = vec![0.0; m];
            for &(site, q, b) in &explicit {
                let w = reader.omega(site);
                let eta = if beta == 0.0 { w } else { (beta * w - shift).exp_m1() / sd };
                theta[b] += q * eta;
            }
            let mut cursor = StreamKey::new(gauss_key.master, r as u64).cursor();
            for (b, &var) in aggregated.iter().enumerate() {
                if var > 0.0 {
                    cursor.seek(SiteId(b as u64));
                    theta[b] += var.sqrt() * cursor.next_gaussian();
                }
            }
            theta.iter_mut().for_each(|v| *v *= norm);
            theta
        })
        .collect();

    let mut blocks = Vec::with_capacity(m);
    let columns: Vec<Vec<f64>> = (0..m).map(|b| samples.iter().map(|s| s[b]).collect()).collect();
    for b in 0..m {
        blocks.push(BlockSummary {
            block: b + 1,
            lo: bounds[b],
            hi: bounds[b + 1],
            oracle_variance: oracle[b],
            moments: moment_summary(&MomentAccumulator::from_slice(&columns[b]))?,
        });
    }
    let mut correlations = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let (c, se) = correlation(&columns[i], &columns[j]);
            correlations.push(BlockCorrelation { i: i + 1, j: j + 1, correlation: c, stderr: se });
        }
    }
    Ok(ThetaBlockStats { n, m, overlap, blocks, correlations })
}

/// Variances `V_k = Σ_{0<n_1<…<n_k≤N} Π_j s(n_j − n_{j−1})` of the chaos
/// terms for `k = 1..=k_max`, where `s = meet` are the replica meeting
/// probabilities.
pub fn chaos_variance_ladder(meet: &[f64], k_max: usize) -> Vec<f64> {
    let n = meet.len() - 1;
    // a[t] = Σ over chains ending at t
    let mut a = vec![0.0; n + 1];
    a[0] = 1.0;
    let mut out = Vec::with_capacity(k_max);
    for _ in 0..k_max {
        let mut next = vec![0.0; n + 1];
        for t in 1..=n {
            next[t] = (0..t).map(|s| a[s] * meet[t - s]).sum();
        }
        out.push(next.iter().sum());
        a = next;
    }
    out
}
