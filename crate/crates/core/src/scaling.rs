//! Pinning free energies: Monte Carlo estimates, the pure-model root,
//! critical-point detection and the weak-coupling scaling collapse.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{log_mgf, sample_field, DisorderSpec, SiteSet};
use crate::error::{Error, Result};
use crate::partition::{Endpoint, PinningPlan};
use crate::renewal::RenewalLaw;
use crate::rng::StreamKey;
use crate::stats::mean_stderr;

/// Shortest horizon accepted by the estimator.
pub const FREE_ENERGY_MIN_N: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyEstimate {
    /// `max(f_raw, 0)`.
    pub f_hat: f64,
    /// `(1/N) mean log Z`.
    pub f_raw: f64,
    pub stderr: f64,
    /// `(mean log Z_N − mean log Z_{N/2})/(N/2)` on the same environments,
    /// which cancels the `O(1/N)` boundary term.
    pub f_doubling: f64,
    pub stderr_doubling: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub samples: usize,
    pub beta: f64,
    pub h: f64,
}

/// `(1/N) E log Z_{N, β, h}` with site weights `e^{βω + h − M(β)}`, free endpoint.
pub fn free_energy_estimate(
    law: &RenewalLaw,
    spec: &DisorderSpec,
    beta: f64,
    h: f64,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<FreeEnergyEstimate> {
    if n < FREE_ENERGY_MIN_N {
        return Err(Error::Domain(format!("free-energy horizon {n} below the floor {FREE_ENERGY_MIN_N}")));
    }
    if samples < 2 {
        return Err(Error::Input("free-energy estimate needs at least 2 samples".into()));
    }
    let shift = h - log_mgf(spec, beta)?;
    let full = PinningPlan::new(law, n)?;
    let half = PinningPlan::new(law, n / 2)?;
    let sites = SiteSet::line(n);
    let pairs: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|r| {
            let field = sample_field(spec, &sites, StreamKey::replica(seed, r as u64))?;
            let a = full.log_partition(&field.values, beta, shift, Endpoint::Free)?;
            let b = half.log_partition(&field.values[..n / 2], beta, shift, Endpoint::Free)?;
            Ok((a, b))
        })
        .collect::<Result<_>>()?;
    let nn = n as f64;
    let per_site: Vec<f64> = pairs.iter().map(|p| p.0 / nn).collect();
    let increments: Vec<f64> = pairs.iter().map(|p| (p.0 - p.1) / (nn - (n / 2) as f64)).collect();
    let (f_raw, stderr) = mean_stderr(&per_site);
    let (f_doubling, stderr_doubling) = mean_stderr(&increments);
    Ok(FreeEnergyEstimate {
        f_hat: f_raw.max(0.0),
        f_raw,
        stderr,
        f_doubling,
        stderr_doubling,
        n,
        samples,
        beta,
        h,
    })
}

/// Free energy of the homogeneous model: the root `F` of
/// `Σ_n K(n) e^{−Fn} = e^{−h}` for `h > 0`, and 0 otherwise.
pub fn pure_free_energy(law: &RenewalLaw, h: f64) -> Result<f64> {
    if !h.is_finite() {
        return Err(Error::Domain(format!("h = {h} must be finite")));
    }
    let defect = law.survival_at(u64::MAX >> 1);
    if h <= -(1.0 - defect).ln() {
        return Ok(0.0);
    }
    let target = (-h).exp();
    let laplace = |f: f64| -> f64 {
        const CAP: u64 = 50_000_000;
        let cut = ((40.0 / f).ceil() as u64).clamp(16, CAP);
        let mut total = 0.0;
        let mut n = 1u64;
        while n <= cut {
            let k = law.kernel_at(n);
            if law.is_tabulated() && n as usize > law.max_horizon {
                break;
            }
            total += k * (-f * n as f64).exp();
            n += 1;
        }
        // remaining mass, at most S(cut) e^{−F cut}
        if cut == CAP {
            total += 0.5 * (law.survival_at(cut) - defect) * (-f * cut as f64).exp();
        }
        total
    };
    // G is decreasing with G(h) ≤ e^{−h}, so the root lies in (0, h]
    let (mut lo, mut hi) = (0.0f64, h);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if laplace(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointEstimate {
    pub beta: f64,
    pub h_c_hat: f64,
    pub bracket: (f64, f64),
    /// Largest detection threshold used.
    pub threshold: f64,
    pub evaluations: Vec<FreeEnergyEstimate>,
}

/// Localization is declared at `h` when `f̂ > threshold`, with the default
/// threshold `3 · stderr` of the same evaluation.
fn localized(est: &FreeEnergyEstimate, threshold: Option<f64>) -> (bool, f64) {
    let t = threshold.unwrap_or(3.0 * est.stderr);
    (est.f_hat > t, t)
}

/// Finds the first grid point that is localized and bisects the interval
/// below it for `levels` steps.
#[allow(clippy::too_many_arguments)]
pub fn critical_point_scan(
    law: &RenewalLaw,
    spec: &DisorderSpec,
    beta: f64,
    h_grid: &[f64],
    n: usize,
    samples: usize,
    threshold: Option<f64>,
    levels: usize,
    seed: u64,
) -> Result<CriticalPointEstimate> {
    if h_grid.len() < 2 || h_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input("h grid must be increasing with at least two points".into()));
    }
    let mut evaluations = Vec::new();
    let mut max_threshold = 0.0f64;
    let mut eval = |h: f64, evaluations: &mut Vec<FreeEnergyEstimate>| -> Result<bool> {
        let est = free_energy_estimate(law, spec, beta, h, n, samples, seed)?;
        let (loc, t) = localized(&est, threshold);
        max_threshold = max_threshold.max(t);
        evaluations.push(est);
        Ok(loc)
    };
    let mut flags = Vec::with_capacity(h_grid.len());
    for &h in h_grid {
        flags.push(eval(h, &mut evaluations)?);
    }
    let first = flags
        .iter()
        .position(|&f| f)
        .filter(|&i| i > 0)
        .ok_or_else(|| Error::Bracketing(format!(
            "no change from delocalized to localized on the h grid [{}, {}]",
            h_grid[0],
            h_grid[h_grid.len() - 1]
        )))?;
    let (mut lo, mut hi) = (h_grid[first - 1], h_grid[first]);
    for _ in 0..levels {
        let mid = 0.5 * (lo + hi);
        if eval(mid, &mut evaluations)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CriticalPointEstimate {
        beta,
        h_c_hat: 0.5 * (lo + hi),
        bracket: (lo, hi),
        threshold: max_threshold,
        evaluations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseRow {
    pub delta: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub beta: f64,
    pub h: f64,
    pub f_hat: f64,
    pub stderr: f64,
    /// `f̂ / δ`.
    pub collapsed_value: f64,
    pub collapsed_stderr: f64,
}

/// `F(β̂ δ^{α−1/2}, ĥ δ^α)/δ` for each mesh, at horizon `N = n_per_delta/δ`.
#[allow(clippy::too_many_arguments)]
pub fn scaling_collapse(
    law: &RenewalLaw,
    spec: &DisorderSpec,
    beta_hat: f64,
    h_hat: f64,
    delta_grid: &[f64],
    n_per_delta: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<CollapseRow>> {
    let alpha = law.alpha;
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::Domain(format!("scaling collapse needs 1/2 < alpha < 1, got {alpha}")));
    }
    if delta_grid.is_empty() || delta_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Input("delta grid must be nonempty and decreasing".into()));
    }
    delta_grid
        .iter()
        .map(|&delta| {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::Domain(format!("mesh {delta} outside (0, 1)")));
            }
            let beta = beta_hat * delta.powf(alpha - 0.5);
            let h = h_hat * delta.powf(alpha);
            let n = (n_per_delta as f64 / delta).round() as usize;
            let est = free_energy_estimate(law, spec, beta, h, n, samples, seed)?;
            Ok(CollapseRow {
                delta,
                n,
                beta,
                h,
                f_hat: est.f_hat,
                stderr: est.stderr,
                collapsed_value: est.f_hat / delta,
                collapsed_stderr: est.stderr / delta,
            })
        })
        .collect()
}

/// `max/min` of a sequence of positive values; infinite if any is zero.
pub fn spread_ratio(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renewal::{build_renewal_law, SlowlyVarying};

    #[test]
    fn zero_coupling_is_zero() {
        let law = build_renewal_law(0.75, SlowlyVarying::Constant, 512).unwrap();
        let est = free_energy_estimate(&law, &DisorderSpec::gaussian(), 0.0, 0.0, 512, 4, 1).unwrap();
        assert_eq!(est.f_hat, 0.0);
        assert!(est.f_raw.abs() < 1e-15);
        assert!(free_energy_estimate(&law, &DisorderSpec::gaussian(), 0.0, 0.0, 128, 4, 1).is_err());
    }

    #[test]
    fn pure_root_solves_the_renewal_identity() {
        // K(1) = 1/2, K(2) = 1/2: e^{-F}/2 + e^{-2F}/2 = e^{-h}
        let law = RenewalLaw::from_table(&[0.5, 0.5]).unwrap();
        let f = pure_free_energy(&law, 0.3).unwrap();
        let lhs = 0.5 * (-f).exp() + 0.5 * (-2.0 * f).exp();
        assert!((lhs - (-0.3f64).exp()).abs() < 1e-14);
        assert_eq!(pure_free_energy(&law, -0.2).unwrap(), 0.0);
        let heavy = build_renewal_law(0.75, SlowlyVarying::Constant, 64).unwrap();
        let f = pure_free_energy(&heavy, 0.3).unwrap();
        assert!(f > 0.0 && f < 0.3);
    }

    #[test]
    fn deterministic_renewal_free_energy_is_h() {
        let law = RenewalLaw::deterministic(1024);
        assert!((pure_free_energy(&law, 0.7).unwrap() - 0.7).abs() < 1e-13);
        let est = free_energy_estimate(&law, &DisorderSpec::gaussian(), 0.0, 0.7, 1024, 2, 1).unwrap();
        assert!((est.f_raw - 0.7).abs() < 1e-12);
    }

    #[test]
    fn spread() {
        assert_eq!(spread_ratio(&[1.0, 2.0, 1.5]), 2.0);
        assert!(spread_ratio(&[0.0, 1.0]).is_infinite());
    }
}
