//! Polynomial chaos expansions: the exact discrete expansion, continuum
//! kernels, second-moment series, white-noise discretizations, correlation
//! rescaling and Lindeberg swap experiments.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::disorder::{log_mgf, sample_field, DisorderSpec, EtaField, SiteSet};
use crate::error::{Error, Result};
use crate::partition::{Endpoint, PinningPlan};
use crate::quad::tanh_sinh;
use crate::renewal::RenewalLaw;
use crate::rng::{SiteId, StreamKey};
use crate::stats::ks_two_sample;
use crate::walk::{kernel_column, KernelColumn, WalkLaw};

/// Largest horizon accepted by the exhaustive oracle.
pub const ORACLE_MAX_N: usize = 16;

/// `C_α = α sin(πα)/π`.
pub fn c_alpha(alpha: f64) -> f64 {
    alpha * (PI * alpha).sin() / PI
}

/// Continuum limit kernels ψ̄.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "branch", rename_all = "kebab-case")]
pub enum ContinuumKernel {
    /// `C_α^k / Π (t_i − t_{i−1})^{1−α}`.
    Alpha { alpha: f64 },
    /// `m^{−k}`.
    FiniteMean { m: f64 },
}

impl ContinuumKernel {
    fn validate(&self) -> Result<()> {
        match *self {
            ContinuumKernel::Alpha { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                Err(Error::Domain(format!("continuum kernel needs alpha in (0, 1), got {alpha}")))
            }
            ContinuumKernel::FiniteMean { m } if !(m > 0.0 && m.is_finite()) => {
                Err(Error::Domain(format!("mean inter-arrival {m} must be positive and finite")))
            }
            _ => Ok(()),
        }
    }

    /// Correlation exponent γ of the discrete kernel.
    pub fn gamma(&self) -> f64 {
        match *self {
            ContinuumKernel::Alpha { alpha } => 1.0 - alpha,
            ContinuumKernel::FiniteMean { .. } => 0.0,
        }
    }

    /// One factor `ψ̄^{(1)}(s)` of the product form.
    #[inline]
    fn factor(&self, gap: f64) -> f64 {
        match *self {
            ContinuumKernel::Alpha { alpha } => c_alpha(alpha) * gap.powf(alpha - 1.0),
            ContinuumKernel::FiniteMean { m } => 1.0 / m,
        }
    }
}

/// Correlation kernels of a model together with a truncation order.
#[derive(Clone, Debug)]
pub struct ChaosCoefficients {
    pub source: ChaosSource,
    pub k_max: usize,
}

#[derive(Clone, Debug)]
pub enum ChaosSource {
    /// `ψ^{(k)}(n_1 < … < n_k) = Π u(n_i − n_{i−1})`, times `u(N − n_k)` when constrained.
    Pinning { u: Vec<f64>, endpoint: Endpoint },
    /// `ψ^{(k)}((n_i, x_i)) = Π q_{n_i − n_{i−1}}(x_i − x_{i−1})`.
    Polymer { walk: WalkLaw, columns: Vec<KernelColumn> },
    Continuum(ContinuumKernel),
}

impl ChaosCoefficients {
    pub fn pinning(law: &RenewalLaw, n: usize, endpoint: Endpoint) -> Result<Self> {
        Ok(ChaosCoefficients {
            source: ChaosSource::Pinning {
                u: crate::renewal::renewal_mass(law, n)?,
                endpoint,
            },
            k_max: n,
        })
    }

    pub fn polymer(walk: &WalkLaw, n: usize) -> Result<Self> {
        let columns = (1..=n)
            .map(|g| kernel_column(walk, g, 1e-15))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChaosCoefficients {
            source: ChaosSource::Polymer {
                walk: walk.clone(),
                columns,
            },
            k_max: n,
        })
    }

    pub fn continuum(kernel: ContinuumKernel, k_max: usize) -> Result<Self> {
        kernel.validate()?;
        Ok(ChaosCoefficients {
            source: ChaosSource::Continuum(kernel),
            k_max,
        })
    }
}

/// `1 + Σ_k Σ_{|A| = k} ψ^{(k)}(A) Π_{x∈A} η_x`, summed exactly.
pub fn chaos_oracle(psi: &ChaosCoefficients, eta: &EtaField) -> Result<f64> {
    match &psi.source {
        ChaosSource::Pinning { u, endpoint } => {
            let n = u.len() - 1;
            if n > ORACLE_MAX_N {
                return Err(Error::Resource(format!(
                    "exhaustive chaos sum over 2^{n} subsets exceeds the limit N ≤ {ORACLE_MAX_N}"
                )));
            }
            let values: Vec<f64> = (1..=n)
                .map(|i| {
                    eta.get(SiteId(i as u64))
                        .ok_or_else(|| Error::Input(format!("η field lacks site {i}")))
                })
                .collect::<Result<_>>()?;
            let end = |last: usize| match endpoint {
                Endpoint::Free => 1.0,
                Endpoint::Constrained => u[n - last],
            };
            fn walk_chains(
                last: usize,
                weight: f64,
                n: usize,
                u: &[f64],
                eta: &[f64],
                k_left: usize,
                end: &dyn Fn(usize) -> f64,
            ) -> f64 {
                let mut total = weight * end(last);
                if k_left == 0 {
                    return total;
                }
                for next in last + 1..=n {
                    let w = weight * u[next - last] * eta[next - 1];
                    if w != 0.0 {
                        total += walk_chains(next, w, n, u, eta, k_left - 1, end);
                    }
                }
                total
            }
            Ok(walk_chains(0, 1.0, n, u, &values, psi.k_max, &end))
        }
        ChaosSource::Polymer { walk, columns } => {
            let n = columns.len();
            if n > ORACLE_MAX_N {
                return Err(Error::Resource(format!(
                    "exhaustive chaos sum for N = {n} exceeds the limit N ≤ {ORACLE_MAX_N}"
                )));
            }
            // positions carrying η at each time
            let mut by_time: Vec<Vec<([i64; 2], f64)>> = vec![Vec::new(); n + 1];
            let layout = site_layout(walk.dim(), n);
            for (site, value) in eta.sites.iter().zip(&eta.values) {
                if let Some(&(t, x)) = layout.get(&site) {
                    by_time[t].push((x, *value));
                }
            }
            fn chains(
                t: usize,
                at: [i64; 2],
                weight: f64,
                by_time: &[Vec<([i64; 2], f64)>],
                columns: &[KernelColumn],
                dim: usize,
                k_left: usize,
            ) -> f64 {
                let mut total = weight;
                if k_left == 0 {
                    return total;
                }
                for next in t + 1..by_time.len() {
                    let col = &columns[next - t - 1];
                    for &(x, e) in &by_time[next] {
                        let d = [x[0] - at[0], x[1] - at[1]];
                        let q = if dim == 1 { col.get(&d[..1]) } else { col.get(&d) };
                        if q != 0.0 && e != 0.0 {
                            total += chains(next, x, weight * q * e, by_time, columns, dim, k_left - 1);
                        }
                    }
                }
                total
            }
            Ok(chains(0, [0, 0], 1.0, &by_time, columns, walk.dim(), psi.k_max))
        }
        ChaosSource::Continuum(_) => Err(Error::Input("the exhaustive oracle needs discrete coefficients".into())),
    }
}

/// Label → (time, position) over the light cone of a walk up to `n`.
fn site_layout(dim: usize, n: usize) -> HashMap<SiteId, (usize, [i64; 2])> {
    let mut out = HashMap::new();
    for t in 1..=n {
        let r = t as i64;
        for x1 in -r..=r {
            if dim == 1 {
                out.insert(SiteId::lattice1(t, x1), (t, [x1, 0]));
            } else {
                for x2 in -r..=r {
                    if (x1 + x2 + r).rem_euclid(2) == 0 && x1.abs() + x2.abs() <= r {
                        out.insert(SiteId::lattice2(t, x1, x2), (t, [x1, x2]));
                    }
                }
            }
        }
    }
    out
}

/// `ψ̄^{(k)}(t_1, …, t_k)`, evaluated after sorting the arguments.
pub fn continuum_kernel_psi(kernel: &ContinuumKernel, times: &[f64]) -> Result<f64> {
    kernel.validate()?;
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    if let ContinuumKernel::Alpha { .. } = kernel {
        if sorted.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Domain("continuum kernel arguments must be positive".into()));
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("continuum kernel is singular at coinciding times".into()));
        }
    }
    let mut value = 1.0;
    let mut prev = 0.0;
    for &t in &sorted {
        value *= kernel.factor(t - prev);
        prev = t;
    }
    Ok(value)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub k_max: usize,
    /// Bound on `Σ_{k > k_max} (1 + ε)^k T_k`.
    pub tail_bound: f64,
    pub epsilon_margin: f64,
    /// `T_0, …, T_{k_max}`.
    pub terms: Vec<f64>,
}

/// Largest chaos order integrated by nested quadrature in the α branch.
pub const QUADRATURE_MAX_K: usize = 3;

/// `E[Z̄²] = Σ_k β̂^{2k} ∫_{0<t_1<…<t_k<t} ψ̄²`, truncated at `k_max`.
pub fn chaos_second_moment(
    kernel: &ContinuumKernel,
    beta_hat: f64,
    h_hat: f64,
    t: f64,
    k_max: usize,
) -> Result<(f64, TruncationReport)> {
    kernel.validate()?;
    if h_hat != 0.0 {
        return Err(Error::Domain(
            "the second-moment series is implemented for h_hat = 0 only".into(),
        ));
    }
    if !(t > 0.0) || !(beta_hat >= 0.0) {
        return Err(Error::Domain("second moment needs t > 0 and beta_hat ≥ 0".into()));
    }
    // centered case: no (1 + ε) inflation of the terms is needed
    let epsilon = 0.0;
    let b2 = beta_hat * beta_hat;
    let mut terms = vec![1.0];
    match *kernel {
        ContinuumKernel::FiniteMean { m } => {
            let one = t / (m * m);
            let mut term = 1.0;
            for k in 1..=k_max {
                term *= b2 * one / k as f64;
                terms.push(term);
            }
        }
        ContinuumKernel::Alpha { alpha } => {
            if alpha <= 0.5 {
                return Err(Error::Domain(format!(
                    "ψ̄ is not square integrable for alpha = {alpha} ≤ 1/2"
                )));
            }
            if k_max > QUADRATURE_MAX_K {
                return Err(Error::Domain(format!(
                    "simplex quadrature is limited to k ≤ {QUADRATURE_MAX_K}; use simulate_continuum_chaos beyond"
                )));
            }
            let c2 = c_alpha(alpha).powi(2);
            let p = 2.0 * alpha - 2.0;
            for k in 1..=k_max {
                let j = simplex_integral(k, t, p, 1e-11)?;
                terms.push((b2 * c2).powi(k as i32) * j);
            }
        }
    }
    let value: f64 = terms.iter().sum();
    let tail_bound = geometric_tail(&terms, epsilon);
    Ok((
        value,
        TruncationReport {
            k_max,
            tail_bound,
            epsilon_margin: epsilon,
            terms,
        },
    ))
}

/// Tail of a series with decreasing term ratios, bounded by the last ratio.
fn geometric_tail(terms: &[f64], epsilon: f64) -> f64 {
    let k = terms.len() - 1;
    if k == 0 {
        return f64::INFINITY;
    }
    let last = terms[k];
    if last == 0.0 {
        return 0.0;
    }
    let ratio = (1.0 + epsilon) * last / terms[k - 1];
    if ratio >= 1.0 {
        f64::INFINITY
    } else {
        (1.0 + epsilon).powi(k as i32) * last * ratio / (1.0 - ratio)
    }
}

/// `J_k(t) = ∫_{0<t_1<…<t_k<t} Π (t_i − t_{i−1})^p`, by nested tanh-sinh quadrature.
fn simplex_integral(k: usize, t: f64, p: f64, tol: f64) -> Result<f64> {
    if k == 0 {
        return Ok(1.0);
    }
    if !(t > 0.0) {
        return Ok(0.0);
    }
    if k == 1 {
        return Ok(t.powf(p + 1.0) / (p + 1.0));
    }
    // J_k(t) = ∫_0^t s^p J_{k−1}(t − s) ds
    let inner_tol = tol * 0.1;
    let failure = std::cell::Cell::new(None);
    let est = tanh_sinh(
        |_, s, rest| {
            match simplex_integral(k - 1, rest, p, inner_tol) {
                Ok(v) => s.powf(p) * v,
                Err(e) => {
                    failure.set(Some(e.to_string()));
                    f64::NAN
                }
            }
        },
        0.0,
        t,
        tol,
    )?;
    if let Some(msg) = failure.take() {
        return Err(Error::Input(msg));
    }
    Ok(est.value)
}

/// Closed form of [`simplex_integral`]: `Γ(p+1)^k t^{k(p+1)} / Γ(k(p+1) + 1)`.
pub fn simplex_closed_form(k: usize, t: f64, p: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let a = p + 1.0;
    (k as f64 * ln_gamma(a) + k as f64 * a * t.ln() - ln_gamma(k as f64 * a + 1.0)).exp()
}

/// Cells allowed in one white-noise discretization (grid size times order).
const SIMULATION_BUDGET: usize = 1 << 26;

/// Breakdown of one discretized continuum partition function.
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosSample {
    /// `Z_0 = 1, Z_1, …, Z_{k_max}`.
    pub terms: Vec<f64>,
    /// `W([0, t])`, the total white noise of the sample (`NaN` for given weights).
    pub noise: f64,
}

impl ChaosSample {
    pub fn value(&self) -> f64 {
        self.terms.iter().sum()
    }
}

/// Number of cells of mesh `delta` in `[0, t]`.
fn cells(t: f64, delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta <= t) {
        return Err(Error::Domain(format!("mesh {delta} must lie in (0, t]")));
    }
    Ok((t / delta).round().max(1.0) as usize)
}

/// Relative error of the midpoint rule on the variance of the first chaos.
pub fn first_chaos_discretization_error(kernel: &ContinuumKernel, t: f64, delta: f64) -> Result<f64> {
    let g = cells(t, delta)?;
    let d = t / g as f64;
    match *kernel {
        ContinuumKernel::FiniteMean { .. } => Ok(0.0),
        ContinuumKernel::Alpha { alpha } => {
            if alpha <= 0.5 {
                return Err(Error::Domain("first chaos has infinite variance for alpha ≤ 1/2".into()));
            }
            let p = 2.0 * alpha - 2.0;
            let discrete: f64 = (1..=g).map(|j| ((j as f64 - 0.5) * d).powf(p) * d).sum();
            let exact = t.powf(p + 1.0) / (p + 1.0);
            Ok((discrete - exact).abs() / exact)
        }
    }
}

/// Replaces white noise on `[0, t]` by independent `N(0, δ)` cell weights and
/// sums the chaos series with ψ̄ at cell midpoints, diagonal cells skipped.
pub fn simulate_continuum_chaos(
    kernel: &ContinuumKernel,
    beta_hat: f64,
    h_hat: f64,
    t: f64,
    delta: f64,
    k_max: usize,
    key: StreamKey,
) -> Result<ChaosSample> {
    let sim = ContinuumSimulator::new(*kernel, beta_hat, h_hat, t, delta, k_max)?;
    Ok(sim.sample(key))
}

/// Precomputed grid for repeated continuum samples.
pub struct ContinuumSimulator {
    kernel: ContinuumKernel,
    beta_hat: f64,
    h_hat: f64,
    delta: f64,
    grid: usize,
    k_max: usize,
    /// FFT of the gap kernel `ψ̄^{(1)}(jδ)` for chain products.
    gap_hat: Option<(Vec<Complex64>, std::sync::Arc<dyn rustfft::Fft<f64>>, std::sync::Arc<dyn rustfft::Fft<f64>>)>,
}

impl ContinuumSimulator {
    pub fn new(kernel: ContinuumKernel, beta_hat: f64, h_hat: f64, t: f64, delta: f64, k_max: usize) -> Result<Self> {
        kernel.validate()?;
        let grid = cells(t, delta)?;
        if grid.saturating_mul(k_max.max(1)) > SIMULATION_BUDGET {
            return Err(Error::Resource(format!(
                "{grid} cells times order {k_max} exceeds the simulation budget"
            )));
        }
        let err = first_chaos_discretization_error(&kernel, t, delta)?;
        if err > 0.01 {
            return Err(Error::Domain(format!(
                "mesh {delta} too coarse: first-chaos discretization error {:.3}% exceeds 1%",
                100.0 * err
            )));
        }
        let d = t / grid as f64;
        let gap_hat = match kernel {
            ContinuumKernel::FiniteMean { .. } => None,
            ContinuumKernel::Alpha { .. } => {
                let size = (2 * grid).next_power_of_two();
                let mut planner = FftPlanner::new();
                let fwd = planner.plan_fft_forward(size);
                let inv = planner.plan_fft_inverse(size);
                let mut g: Vec<Complex64> = (0..size)
                    .map(|j| {
                        let v = if j >= 1 && j < grid { kernel.factor(j as f64 * d) / size as f64 } else { 0.0 };
                        Complex64::new(v, 0.0)
                    })
                    .collect();
                fwd.process(&mut g);
                Some((g, fwd, inv))
            }
        };
        Ok(ContinuumSimulator {
            kernel,
            beta_hat,
            h_hat,
            delta: d,
            grid,
            k_max,
            gap_hat,
        })
    }

    pub fn sample(&self, key: StreamKey) -> ChaosSample {
        let mut cursor = key.cursor();
        cursor.seek(SiteId(0));
        let sd = self.delta.sqrt();
        let mut noise = 0.0;
        let weights: Vec<f64> = (0..self.grid)
            .map(|_| {
                let w = sd * cursor.next_gaussian();
                noise += w;
                self.beta_hat * w + self.h_hat * self.delta
            })
            .collect();
        ChaosSample { noise, ..self.evaluate(&weights) }
    }

    /// Chaos terms for given cell weights `β̂ W(cell) + ĥ δ`.
    pub fn evaluate(&self, weights: &[f64]) -> ChaosSample {
        let mut terms = vec![1.0];
        match self.kernel {
            ContinuumKernel::FiniteMean { m } => {
                // elementary symmetric polynomials e_k of the weights
                let mut e = vec![0.0; self.k_max + 1];
                e[0] = 1.0;
                for &a in weights {
                    for k in (1..=self.k_max).rev() {
                        e[k] += e[k - 1] * a;
                    }
                }
                let mut scale = 1.0;
                for &ek in &e[1..] {
                    scale /= m;
                    terms.push(ek * scale);
                }
            }
            ContinuumKernel::Alpha { .. } => {
                let (gap_hat, fwd, inv) = self.gap_hat.as_ref().unwrap();
                let size = gap_hat.len();
                // F_1(j) = a_j ψ̄(t_j), F_k(j) = a_j Σ_{i<j} F_{k−1}(i) ψ̄((j − i)δ)
                let mut f: Vec<f64> = weights
                    .iter()
                    .enumerate()
                    .map(|(j, a)| a * self.kernel.factor((j as f64 + 0.5) * self.delta))
                    .collect();
                terms.push(f.iter().sum());
                let mut buf = vec![Complex64::new(0.0, 0.0); size];
                for _ in 2..=self.k_max {
                    for (i, slot) in buf.iter_mut().enumerate() {
                        *slot = Complex64::new(f.get(i).copied().unwrap_or(0.0), 0.0);
                    }
                    fwd.process(&mut buf);
                    for (b, g) in buf.iter_mut().zip(gap_hat) {
                        *b *= g;
                    }
                    inv.process(&mut buf);
                    for (j, v) in f.iter_mut().enumerate() {
                        *v = weights[j] * buf[j].re;
                    }
                    terms.push(f.iter().sum());
                }
            }
        }
        ChaosSample { terms, noise: f64::NAN }
    }
}

/// `L²([0,1]^k)` distance between the rescaled discrete correlation and ψ̄.
///
/// The discrete kernel on cells `((i−1)δ, iδ]` is `Π N^γ L(N) u(i_j − i_{j−1})`
/// with `L` the effective slowly varying function of the normalized law.
pub fn rescaled_correlation_error(law: &RenewalLaw, kernel: &ContinuumKernel, k: usize, n: usize) -> Result<f64> {
    kernel.validate()?;
    if k == 0 || k > 3 {
        return Err(Error::Domain(format!("correlation order k = {k} outside 1..=3")));
    }
    let u = crate::renewal::renewal_mass(law, n)?;
    let scale = match kernel {
        ContinuumKernel::Alpha { .. } => (n as f64).powf(kernel.gamma()) * law.effective_l(n as f64),
        ContinuumKernel::FiniteMean { .. } => 1.0,
    };
    let table: Vec<f64> = u.iter().map(|v| v * scale).collect();
    correlation_distance(&|i: usize| table[i], kernel, k, n)
}

/// Distance between a piecewise-constant product kernel with factors
/// `factor(gap in cells)` and ψ̄, over the ordered sector without the diagonal.
pub fn correlation_distance(factor: &dyn Fn(usize) -> f64, kernel: &ContinuumKernel, k: usize, n: usize) -> Result<f64> {
    let d = 1.0 / n as f64;
    let ordered = match k {
        1 => {
            let mut total = 0.0;
            for i in 1..=n {
                let dv = factor(i);
                let (a, b) = ((i - 1) as f64 * d, i as f64 * d);
                let est = tanh_sinh(
                    |_, da, _| {
                        let diff = dv - kernel.factor(a + da);
                        diff * diff
                    },
                    a,
                    b,
                    1e-10,
                )?;
                total += est.value;
            }
            total
        }
        2 | 3 => {
            if n.pow(k as u32) > 1 << 30 {
                return Err(Error::Resource(format!("grid of {n}^{k} cells exceeds the budget")));
            }
            // three-point Gauss–Legendre per coordinate inside each cell
            let nodes = [0.5 - 0.5 * (0.6f64).sqrt(), 0.5, 0.5 + 0.5 * (0.6f64).sqrt()];
            let wts = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
            let mut total = 0.0;
            let mut idx = vec![0usize; k];
            fn rec(
                level: usize,
                start: usize,
                idx: &mut Vec<usize>,
                n: usize,
                k: usize,
                eval: &mut dyn FnMut(&[usize]),
            ) {
                if level == k {
                    eval(idx);
                    return;
                }
                for i in start..=n {
                    idx[level] = i;
                    rec(level + 1, i + 1, idx, n, k, eval);
                }
            }
            let mut eval = |cells: &[usize]| {
                let mut discrete = 1.0;
                let mut prev = 0usize;
                for &c in cells {
                    discrete *= factor(c - prev);
                    prev = c;
                }
                let mut acc = 0.0;
                let mut point = [0usize; 3];
                loop {
                    let mut w = 1.0;
                    let mut value = 1.0;
                    let mut last = 0.0;
                    for j in 0..k {
                        w *= wts[point[j]];
                        let x = (cells[j] as f64 - 1.0 + nodes[point[j]]) * d;
                        value *= kernel.factor(x - last);
                        last = x;
                    }
                    acc += w * (discrete - value).powi(2);
                    let mut j = 0;
                    while j < k {
                        point[j] += 1;
                        if point[j] < 3 {
                            break;
                        }
                        point[j] = 0;
                        j += 1;
                    }
                    if j == k {
                        break;
                    }
                }
                total += acc * d.powi(k as i32);
            };
            rec(0, 1, &mut idx, n, k, &mut eval);
            total
        }
        _ => unreachable!(),
    };
    // full cube is k! copies of the ordered sector
    let fact: f64 = (1..=k).map(|j| j as f64).product();
    Ok((ordered * fact).sqrt())
}

/// Weak-disorder parameters `(β_N, h'_N)` for a renewal law at horizon `N`.
pub fn weak_disorder_scaling(law: &RenewalLaw, beta_hat: f64, h_hat: f64, n: usize) -> Result<(f64, f64)> {
    let nn = n as f64;
    if law.mean_interarrival.is_finite() {
        Ok((beta_hat / nn.sqrt(), h_hat / nn))
    } else if law.alpha > 0.5 && law.alpha < 1.0 {
        let l = law.effective_l(nn);
        Ok((beta_hat * l * nn.powf(0.5 - law.alpha), h_hat * l * nn.powf(-law.alpha)))
    } else {
        Err(Error::Domain(format!(
            "weak-disorder scaling needs 1/2 < alpha < 1 or a finite mean, got alpha = {}",
            law.alpha
        )))
    }
}

/// Pinning model description shared by the Lindeberg and second-moment experiments.
#[derive(Clone, Debug)]
pub struct WeakPinning {
    pub law: RenewalLaw,
    pub beta_hat: f64,
    pub h_hat: f64,
    pub endpoint: Endpoint,
}

impl WeakPinning {
    /// Samples `Z_{N, β_N, h'_N − M(β_N)}` under `spec` for replicas `0..samples`.
    pub fn sample_z(&self, spec: &DisorderSpec, n: usize, samples: usize, key: StreamKey) -> Result<Vec<f64>> {
        let (beta, h_prime) = weak_disorder_scaling(&self.law, self.beta_hat, self.h_hat, n)?;
        let h = h_prime - log_mgf(spec, beta)?;
        let plan = PinningPlan::new(&self.law, n)?;
        (0..samples)
            .into_par_iter()
            .map(|r| {
                let field = sample_field(spec, &SiteSet::line(n), StreamKey::new(key.master, key.stream.wrapping_add(r as u64)))?;
                Ok(plan.log_partition(&field.values, beta, h, self.endpoint)?.exp())
            })
            .collect()
    }
}

/// Two-sample KS distance between the laws of `Z` under two disorder families.
///
/// Replica `r` of both samples uses stream `key.stream + r`, so the two
/// environments are built from the same uniforms (a quantile coupling);
/// this leaves each marginal law unchanged and removes most of the noise
/// from the comparison.
pub fn lindeberg_distance(
    model: &WeakPinning,
    spec_a: &DisorderSpec,
    spec_b: &DisorderSpec,
    n: usize,
    samples: usize,
    key: StreamKey,
    coupled: bool,
) -> Result<f64> {
    let za = model.sample_z(spec_a, n, samples, key)?;
    let key_b = if coupled { key } else { key.derive(0xb) };
    let zb = model.sample_z(spec_b, n, samples, key_b)?;
    ks_two_sample(&za, &zb)
}
