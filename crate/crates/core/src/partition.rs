//! Exact partition functions of the discrete models and the closed-form
//! continuum pinning partition function.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::conv::ConvPlan;
use crate::disorder::{log_mgf, DisorderField, DisorderSpec, Environment, EnvironmentReader, EXPONENT_LIMIT};
use crate::error::{Error, Result};
use crate::renewal::RenewalLaw;
use crate::rng::{SiteId, StreamKey};
use crate::walk::{ssrw_window, WalkFamily, WalkLaw, WindowConvolver};

/// Pinning horizons up to this length use the direct recursion.
const PINNING_DIRECT: usize = 256;

/// Cells (layers times window width) allowed for one polymer evaluation.
const POLYMER_BUDGET: usize = 1 << 27;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Pinning,
    Polymer,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Endpoint {
    #[default]
    Free,
    Constrained,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionValue {
    pub value: f64,
    pub log_value: f64,
    pub model: Model,
    pub n: usize,
    pub beta: f64,
    pub h: f64,
    pub endpoint: Endpoint,
    pub key: StreamKey,
}

impl PartitionValue {
    fn new(log_value: f64, model: Model, n: usize, beta: f64, h: f64, endpoint: Endpoint, key: StreamKey) -> Self {
        PartitionValue {
            value: log_value.exp(),
            log_value,
            model,
            n,
            beta,
            h,
            endpoint,
            key,
        }
    }
}

/// Reusable pinning evaluator for one law and horizon.
#[derive(Debug)]
pub struct PinningPlan {
    conv: ConvPlan,
    survival: Vec<f64>,
    n: usize,
}

impl PinningPlan {
    pub fn new(law: &RenewalLaw, n: usize) -> Result<Self> {
        if n == 0 || n > law.max_horizon {
            return Err(Error::Input(format!(
                "pinning horizon {n} outside [1, N_max = {}]",
                law.max_horizon
            )));
        }
        Ok(PinningPlan {
            conv: ConvPlan::new(&law.pmf, n, PINNING_DIRECT),
            survival: law.survival[..=n].to_vec(),
            n,
        })
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    /// `log Z` for disorder `omega[0..N]` at sites `1..=N`.
    pub fn log_partition(&self, omega: &[f64], beta: f64, h: f64, endpoint: Endpoint) -> Result<f64> {
        if omega.len() != self.n {
            return Err(Error::Input(format!(
                "disorder has {} sites but the horizon is {}",
                omega.len(),
                self.n
            )));
        }
        let mut exponents = Vec::with_capacity(self.n);
        for (i, &w) in omega.iter().enumerate() {
            let x = beta * w + h;
            if x > EXPONENT_LIMIT {
                return Err(Error::Overflow { site: i as u64 + 1, exponent: x });
            }
            exponents.push(x);
        }
        Ok(self.log_partition_exponents(&exponents, endpoint))
    }

    /// `log Z` with site weights `exp(exponents[n − 1])`.
    pub fn log_partition_exponents(&self, exponents: &[f64], endpoint: Endpoint) -> f64 {
        let sol = self.conv.solve(Some(exponents), self.n);
        match endpoint {
            Endpoint::Constrained => sol.log_at(self.n),
            Endpoint::Free => {
                let n = self.n;
                let total: f64 = (0..=n).rev().map(|m| sol.scaled[m] * self.survival[n - m]).sum();
                total.ln() + sol.log_scale
            }
        }
    }
}

pub fn pinning_partition(
    law: &RenewalLaw,
    omega: &DisorderField,
    beta: f64,
    h: f64,
    n: usize,
    endpoint: Endpoint,
) -> Result<PartitionValue> {
    let plan = PinningPlan::new(law, n)?;
    let log_z = plan.log_partition(&omega.values, beta, h, endpoint)?;
    Ok(PartitionValue::new(log_z, Model::Pinning, n, beta, h, endpoint, omega.key))
}

/// `E[Z²]` of the free-endpoint model with exactly centered weights, where
/// `kernel[n]` is the probability that two replicas meet at time `n` and
/// `v = e^{λ} − 1` is the variance of η.
///
/// The overlap set of two replicas is itself a renewal with kernel-based
/// one-point function, so `E[Z²] = Σ_n w(n)` with
/// `w(n) = v Σ_{m<n} w(m) kernel[n − m]`.
pub fn replica_second_moment(kernel: &[f64], v: f64, n: usize) -> f64 {
    if v == 0.0 || n == 0 {
        return 1.0;
    }
    let plan = ConvPlan::new(kernel, n, PINNING_DIRECT);
    let exps = vec![v.ln(); n];
    let sol = plan.solve(Some(&exps), n);
    sol.scaled.iter().sum::<f64>() * sol.log_scale.exp()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolymerMode {
    #[default]
    PointToPlane,
    PointToPoint([i64; 2]),
}

/// Source of the space-time environment of a polymer.
pub enum Omega<'a> {
    Field(&'a DisorderField),
    Lazy(&'a Environment),
}

impl Omega<'_> {
    fn spec(&self) -> DisorderSpec {
        match self {
            Omega::Field(f) => f.spec,
            Omega::Lazy(e) => e.spec,
        }
    }

    fn key(&self) -> StreamKey {
        match self {
            Omega::Field(f) => f.key,
            Omega::Lazy(e) => e.key,
        }
    }

    fn reader(&self) -> OmegaReader {
        match self {
            Omega::Field(f) => OmegaReader::Table(f.sites.iter().zip(f.values.iter().copied()).collect()),
            Omega::Lazy(e) => OmegaReader::Lazy(e.reader()),
        }
    }
}

enum OmegaReader {
    Table(HashMap<SiteId, f64>),
    Lazy(EnvironmentReader),
}

impl OmegaReader {
    fn fill(&mut self, first: SiteId, stride: u64, out: &mut [f64]) -> Result<()> {
        match self {
            OmegaReader::Lazy(r) => {
                if stride == 1 {
                    r.fill_run(first, out);
                } else {
                    r.fill_run_stride2(first, out);
                }
                Ok(())
            }
            OmegaReader::Table(map) => {
                for (i, slot) in out.iter_mut().enumerate() {
                    let site = SiteId(first.0 + stride * i as u64);
                    *slot = *map.get(&site).ok_or_else(|| {
                        Error::Input(format!("disorder field does not cover site label {}", site.0))
                    })?;
                }
                Ok(())
            }
        }
    }
}

/// Window layout of a polymer evaluation, shared by all environments.
#[derive(Clone, Debug)]
pub struct PolymerPlan {
    pub walk: WalkLaw,
    pub n: usize,
    /// Simple walks: half-width constant `c` of the window `min(m, c√m)`.
    pub window_constant: f64,
    /// Stable walks: fixed half-width of the spatial window.
    pub radius: usize,
    /// Mass of the free walk lost to the window.
    pub truncation_mass: f64,
}

impl PolymerPlan {
    pub fn new(walk: &WalkLaw, n: usize, tol: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("polymer horizon must be positive".into()));
        }
        if !(tol > 0.0 && tol <= 1e-3) {
            return Err(Error::Domain(format!("tolerance {tol} outside (0, 1e-3]")));
        }
        let mut plan = PolymerPlan {
            walk: walk.clone(),
            n,
            window_constant: 0.0,
            radius: 0,
            truncation_mass: 0.0,
        };
        match walk.family {
            WalkFamily::Ssrw1d | WalkFamily::Ssrw2d => {
                let per_coordinate = if walk.dim() == 2 { tol / 2.0 } else { tol };
                let mut c = 4.0;
                loop {
                    let lost = pure_ssrw_loss(n, c);
                    if lost <= per_coordinate {
                        plan.window_constant = c;
                        plan.truncation_mass = if walk.dim() == 2 { 1.0 - (1.0 - lost).powi(2) } else { lost };
                        break;
                    }
                    c += 0.5;
                    if c > 40.0 {
                        return Err(Error::Resource(format!("no polymer window meets tolerance {tol}")));
                    }
                }
                let width = ssrw_window(n, plan.window_constant) + 1;
                let cells = if walk.dim() == 2 { width * width } else { width };
                if cells > POLYMER_BUDGET / 8 {
                    return Err(Error::Resource(format!("polymer layer at N = {n} exceeds the memory budget")));
                }
            }
            WalkFamily::Stable1d { x_max: None, .. } => {
                return Err(Error::Domain("polymer transfer needs a truncated step law (finite X_max)".into()));
            }
            WalkFamily::Stable1d { .. } => {
                let column = crate::walk::kernel_column(walk, n, tol)?;
                plan.radius = column.radius;
                plan.truncation_mass = column.truncation_mass;
                if (2 * plan.radius + 1) * n > POLYMER_BUDGET {
                    return Err(Error::Resource(format!(
                        "stable polymer at N = {n} needs a window of half-width {} per layer",
                        plan.radius
                    )));
                }
            }
        }
        Ok(plan)
    }

    /// `log Z` with weights `e^{βω − shift}`.
    pub fn log_partition(&self, omega: &Omega<'_>, beta: f64, shift: f64, mode: PolymerMode) -> Result<f64> {
        let mut reader = omega.reader();
        match self.walk.family {
            WalkFamily::Ssrw1d => self.ssrw1d(&mut reader, beta, shift, mode),
            WalkFamily::Ssrw2d => self.ssrw2d(&mut reader, beta, shift, mode),
            _ => self.stable(&mut reader, beta, shift, mode),
        }
    }

    fn ssrw1d(&self, reader: &mut OmegaReader, beta: f64, shift: f64, mode: PolymerMode) -> Result<f64> {
        let c = self.window_constant;
        // layer m holds compressed indices i in [lo, hi], x = 2i − m
        let mut lo = 0usize;
        let mut layer = vec![1.0f64];
        let mut log_scale = 0.0;
        let mut omega = Vec::new();
        for m in 1..=self.n {
            let (nlo, nhi) = compressed_range(m, ssrw_window(m, c));
            let len = nhi - nlo + 1;
            omega.resize(len, 0.0);
            let x0 = 2 * nlo as i64 - m as i64;
            reader.fill(SiteId::lattice1(m, x0), 2, &mut omega)?;
            let mut next = vec![0.0; len];
            let mut peak = 0.0f64;
            for (k, slot) in next.iter_mut().enumerate() {
                let i = nlo + k;
                let left = if i >= 1 && i - 1 >= lo { layer.get(i - 1 - lo).copied().unwrap_or(0.0) } else { 0.0 };
                let right = if i >= lo { layer.get(i - lo).copied().unwrap_or(0.0) } else { 0.0 };
                let x = beta * omega[k] - shift;
                check_exponent(x, SiteId::lattice1(m, 2 * i as i64 - m as i64))?;
                *slot = 0.5 * (left + right) * x.exp();
                peak = peak.max(*slot);
            }
            rescale(&mut next, peak, &mut log_scale);
            layer = next;
            lo = nlo;
        }
        let total = match mode {
            PolymerMode::PointToPlane => layer.iter().sum::<f64>(),
            PolymerMode::PointToPoint([x, _]) => {
                let n = self.n as i64;
                if (x + n).rem_euclid(2) != 0 || x.abs() > n {
                    return Err(Error::Input(format!("endpoint {x} is not reachable in {n} steps")));
                }
                let i = ((x + n) / 2) as usize;
                if i < lo || i - lo >= layer.len() {
                    return Err(Error::Resource(format!("endpoint {x} lies outside the polymer window")));
                }
                layer[i - lo]
            }
        };
        Ok(total.ln() + log_scale)
    }

    fn ssrw2d(&self, reader: &mut OmegaReader, beta: f64, shift: f64, mode: PolymerMode) -> Result<f64> {
        let c = self.window_constant;
        let mut lo = 0usize;
        let mut side = 1usize;
        let mut layer = vec![1.0f64];
        let mut log_scale = 0.0;
        let mut omega = Vec::new();
        let mut half = Vec::new();
        for m in 1..=self.n {
            let (nlo, nhi) = compressed_range(m, ssrw_window(m, c));
            let nside = nhi - nlo + 1;
            let get = |layer: &[f64], i: usize, j: usize| -> f64 {
                if i < lo || j < lo || i - lo >= side || j - lo >= side {
                    0.0
                } else {
                    layer[(i - lo) * side + (j - lo)]
                }
            };
            // first average over u into `half`, indexed by new i and old j
            half.clear();
            half.resize(nside * (side + 1), 0.0);
            for a in 0..nside {
                let i = nlo + a;
                for (b, jj) in (lo..lo + side).enumerate() {
                    let left = if i >= 1 { get(&layer, i - 1, jj) } else { 0.0 };
                    half[a * (side + 1) + b] = 0.5 * (left + get(&layer, i, jj));
                }
            }
            let hget = |a: usize, j: usize| -> f64 {
                if j < lo || j - lo >= side {
                    0.0
                } else {
                    half[a * (side + 1) + (j - lo)]
                }
            };
            let mut next = vec![0.0; nside * nside];
            omega.resize(nside, 0.0);
            let v0 = 2 * nlo as i64 - m as i64;
            let mut peak = 0.0f64;
            for a in 0..nside {
                let u = 2 * (nlo + a) as i64 - m as i64;
                reader.fill(SiteId::rotated(m, u, v0), 1, &mut omega)?;
                for (b, &w) in omega.iter().enumerate() {
                    let j = nlo + b;
                    let left = if j >= 1 { hget(a, j - 1) } else { 0.0 };
                    let base = 0.5 * (left + hget(a, j));
                    let x = beta * w - shift;
                    if x > EXPONENT_LIMIT {
                        return Err(Error::Overflow {
                            site: SiteId::rotated(m, u, 2 * j as i64 - m as i64).0,
                            exponent: x,
                        });
                    }
                    let z = base * x.exp();
                    next[a * nside + b] = z;
                    peak = peak.max(z);
                }
            }
            rescale(&mut next, peak, &mut log_scale);
            layer = next;
            lo = nlo;
            side = nside;
        }
        let total = match mode {
            PolymerMode::PointToPlane => layer.iter().sum::<f64>(),
            PolymerMode::PointToPoint([x1, x2]) => {
                let n = self.n as i64;
                let (u, v) = (x1 + x2, x1 - x2);
                if (u + n).rem_euclid(2) != 0 || u.abs() > n || v.abs() > n {
                    return Err(Error::Input(format!("endpoint ({x1}, {x2}) is not reachable in {n} steps")));
                }
                let (i, j) = (((u + n) / 2) as usize, ((v + n) / 2) as usize);
                if i < lo || j < lo || i - lo >= side || j - lo >= side {
                    return Err(Error::Resource(format!("endpoint ({x1}, {x2}) lies outside the polymer window")));
                }
                layer[(i - lo) * side + (j - lo)]
            }
        };
        Ok(total.ln() + log_scale)
    }

    fn stable(&self, reader: &mut OmegaReader, beta: f64, shift: f64, mode: PolymerMode) -> Result<f64> {
        let radius = self.radius;
        let side = 2 * radius + 1;
        let r = self.walk.step_radius;
        let reach = r.min(2 * radius);
        let step = &self.walk.step_pmf[r - reach..=r + reach];
        let mut conv = WindowConvolver::new(side, step.len());
        let mut layer = vec![0.0; side];
        layer[radius] = 1.0;
        let mut log_scale = 0.0;
        let mut omega = vec![0.0; side];
        for m in 1..=self.n {
            let mut next = conv.apply(&layer, step, reach);
            reader.fill(SiteId::lattice1(m, -(radius as i64)), 1, &mut omega)?;
            let mut peak = 0.0f64;
            for (k, (z, &w)) in next.iter_mut().zip(&omega).enumerate() {
                let x = beta * w - shift;
                check_exponent(x, SiteId::lattice1(m, k as i64 - radius as i64))?;
                *z *= x.exp();
                peak = peak.max(*z);
            }
            rescale(&mut next, peak, &mut log_scale);
            layer = next;
        }
        let total = match mode {
            PolymerMode::PointToPlane => layer.iter().sum::<f64>(),
            PolymerMode::PointToPoint([x, _]) => {
                if x.unsigned_abs() as usize > radius {
                    return Err(Error::Resource(format!("endpoint {x} lies outside the polymer window")));
                }
                layer[(x + radius as i64) as usize]
            }
        };
        Ok(total.ln() + log_scale)
    }
}

fn check_exponent(x: f64, site: SiteId) -> Result<()> {
    if x > EXPONENT_LIMIT {
        return Err(Error::Overflow { site: site.0, exponent: x });
    }
    Ok(())
}

fn rescale(values: &mut [f64], peak: f64, log_scale: &mut f64) {
    if peak > 1e100 || (peak < 1e-100 && peak > 0.0) {
        let inv = 1.0 / peak;
        values.iter_mut().for_each(|v| *v *= inv);
        *log_scale += peak.ln();
    }
}

/// Compressed indices `i` with `|2i − m| ≤ w`.
fn compressed_range(m: usize, w: usize) -> (usize, usize) {
    let lo = (m.saturating_sub(w) + 1) / 2;
    let hi = (m + w) / 2;
    (lo, hi)
}

fn pure_ssrw_loss(n: usize, c: f64) -> f64 {
    let mut lo = 0usize;
    let mut layer = vec![1.0f64];
    for m in 1..=n {
        let (nlo, nhi) = compressed_range(m, ssrw_window(m, c));
        let next: Vec<f64> = (nlo..=nhi)
            .map(|i| {
                let left = if i >= 1 && i - 1 >= lo { layer.get(i - 1 - lo).copied().unwrap_or(0.0) } else { 0.0 };
                let right = if i >= lo { layer.get(i - lo).copied().unwrap_or(0.0) } else { 0.0 };
                0.5 * (left + right)
            })
            .collect();
        layer = next;
        lo = nlo;
    }
    (1.0 - layer.iter().sum::<f64>()).max(0.0)
}

/// Default truncation tolerance of polymer windows.
pub const POLYMER_TOL: f64 = 1e-6;

pub fn polymer_partition(
    walk: &WalkLaw,
    omega: &Omega<'_>,
    beta: f64,
    n: usize,
    mode: PolymerMode,
) -> Result<PartitionValue> {
    let plan = PolymerPlan::new(walk, n, POLYMER_TOL)?;
    let m = log_mgf(&omega.spec(), beta)?;
    let log_z = plan.log_partition(omega, beta, m, mode)?;
    Ok(PartitionValue::new(log_z, Model::Polymer, n, beta, -m, Endpoint::Free, omega.key()))
}

/// Parameters of the finite-mean continuum pinning partition function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuumPinningParams {
    pub beta_hat: f64,
    pub h_hat: f64,
    pub t: f64,
    pub mean_interarrival: f64,
}

impl ContinuumPinningParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_interarrival > 0.0 && self.mean_interarrival.is_finite()) {
            return Err(Error::Domain(format!(
                "mean inter-arrival {} must be positive and finite",
                self.mean_interarrival
            )));
        }
        if !(self.t > 0.0) || !(self.beta_hat >= 0.0) || !self.h_hat.is_finite() {
            return Err(Error::Domain("continuum pinning needs t > 0, beta_hat ≥ 0 and finite h_hat".into()));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        (self.h_hat * self.t / self.mean_interarrival).exp()
    }

    pub fn second_moment(&self) -> f64 {
        let m = self.mean_interarrival;
        (2.0 * self.h_hat * self.t / m + self.beta_hat * self.beta_hat * self.t / (m * m)).exp()
    }
}

/// `exp{(β̂/m) W_t + (ĥ/m − β̂²/(2m²)) t}` with `W_t ~ N(0, t)`.
pub fn continuum_pinning_sample(params: &ContinuumPinningParams, key: StreamKey) -> Result<f64> {
    params.validate()?;
    let w = params.t.sqrt() * key.cursor().next_gaussian();
    Ok(continuum_pinning_from_noise(params, w))
}

pub fn continuum_pinning_from_noise(params: &ContinuumPinningParams, w_t: f64) -> f64 {
    let m = params.mean_interarrival;
    let b = params.beta_hat;
    (b / m * w_t + (params.h_hat / m - b * b / (2.0 * m * m)) * params.t).exp()
}
