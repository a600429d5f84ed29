//! Heavy-tailed renewal processes on the integers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::conv::ConvPlan;
use crate::error::{Error, Result};
use crate::quad::semi_infinite;
use crate::rng::StreamKey;

/// Renewal mass functions up to this horizon are computed by direct sums.
pub const DIRECT_RENEWAL_HORIZON: usize = 1 << 16;

/// Terms summed explicitly before the Euler–Maclaurin tail takes over.
const EXPLICIT_TERMS: u64 = 4096;

/// Slowly varying correction `L` in `K(n) ∝ L(n) n^{−(1+α)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SlowlyVarying {
    Constant,
    /// `(1 + ln n)^κ`
    LogPower(f64),
}

impl SlowlyVarying {
    #[inline]
    pub fn at(self, n: f64) -> f64 {
        match self {
            SlowlyVarying::Constant => 1.0,
            SlowlyVarying::LogPower(kappa) => (1.0 + n.ln()).powf(kappa),
        }
    }

    fn kappa(self) -> f64 {
        match self {
            SlowlyVarying::Constant => 0.0,
            SlowlyVarying::LogPower(kappa) => kappa,
        }
    }
}

impl fmt::Display for SlowlyVarying {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlowlyVarying::Constant => f.write_str("constant"),
            SlowlyVarying::LogPower(k) => write!(f, "log-power({k})"),
        }
    }
}

impl FromStr for SlowlyVarying {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "constant" || s == "1" {
            return Ok(SlowlyVarying::Constant);
        }
        s.strip_prefix("log-power(")
            .and_then(|rest| rest.strip_suffix(')'))
            .and_then(|k| k.trim().parse::<f64>().ok())
            .filter(|k| k.is_finite())
            .map(SlowlyVarying::LogPower)
            .ok_or_else(|| Error::Input(format!("unknown slowly varying function `{s}`")))
    }
}

/// Serializable description of a renewal law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenewalSpec {
    pub alpha: f64,
    #[serde(rename = "L", default = "default_l")]
    pub l: String,
    #[serde(rename = "N_max")]
    pub n_max: usize,
}

fn default_l() -> String {
    "constant".into()
}

impl RenewalSpec {
    pub fn build(&self) -> Result<RenewalLaw> {
        build_renewal_law(self.alpha, self.l.parse()?, self.n_max)
    }
}

/// Inter-arrival law tabulated up to `max_horizon`.
#[derive(Clone, Debug, PartialEq)]
pub struct RenewalLaw {
    /// `f64::INFINITY` for laws given by an explicit table.
    pub alpha: f64,
    pub slowly_varying: SlowlyVarying,
    pub max_horizon: usize,
    /// `pmf[n] = K(n)` for `n = 0..=max_horizon`, with `pmf[0] = 0`.
    pub pmf: Vec<f64>,
    /// `survival[n] = P(τ₁ > n)`.
    pub survival: Vec<f64>,
    /// `Σ_{n≥1} L(n) n^{−(1+α)}`.
    pub normalization: f64,
    pub mean_interarrival: f64,
}

pub fn build_renewal_law(alpha: f64, slowly_varying: SlowlyVarying, n_max: usize) -> Result<RenewalLaw> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("renewal exponent alpha = {alpha} must be positive")));
    }
    if n_max < 2 {
        return Err(Error::Domain(format!("N_max = {n_max} must be at least 2")));
    }
    if let SlowlyVarying::LogPower(k) = slowly_varying {
        if !k.is_finite() {
            return Err(Error::Domain(format!("log-power exponent {k} must be finite")));
        }
    }
    let s = 1.0 + alpha;
    let kappa = slowly_varying.kappa();
    let normalization = power_log_sum(s, kappa, 1);
    let pmf: Vec<f64> = (0..=n_max)
        .map(|n| {
            if n == 0 {
                0.0
            } else {
                let x = n as f64;
                slowly_varying.at(x) * x.powf(-s) / normalization
            }
        })
        .collect();
    let mut survival = vec![0.0; n_max + 1];
    survival[n_max] = power_log_sum(s, kappa, n_max as u64 + 1) / normalization;
    for n in (0..n_max).rev() {
        survival[n] = survival[n + 1] + pmf[n + 1];
    }
    let mean_interarrival = if alpha > 1.0 || (alpha == 1.0 && kappa < -1.0) {
        power_log_sum(alpha, kappa, 1) / normalization
    } else {
        f64::INFINITY
    };
    Ok(RenewalLaw {
        alpha,
        slowly_varying,
        max_horizon: n_max,
        pmf,
        survival,
        normalization,
        mean_interarrival,
    })
}

impl RenewalLaw {
    /// A law given by `table[n − 1] = K(n)`; the table must sum to at most 1.
    pub fn from_table(table: &[f64]) -> Result<Self> {
        if table.is_empty() || table.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Input("renewal table must be a nonempty list of probabilities".into()));
        }
        let total: f64 = table.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::Input(format!("renewal table sums to {total} > 1")));
        }
        let n_max = table.len().max(2);
        let mut pmf = vec![0.0; n_max + 1];
        pmf[1..=table.len()].copy_from_slice(table);
        let mut survival = vec![0.0; n_max + 1];
        survival[n_max] = (1.0 - total).max(0.0);
        for n in (0..n_max).rev() {
            survival[n] = survival[n + 1] + pmf[n + 1];
        }
        let mean = if survival[n_max] > 0.0 {
            f64::INFINITY
        } else {
            table.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
        };
        Ok(RenewalLaw {
            alpha: f64::INFINITY,
            slowly_varying: SlowlyVarying::Constant,
            max_horizon: n_max,
            pmf,
            survival,
            normalization: 1.0,
            mean_interarrival: mean,
        })
    }

    /// The period-one renewal `τ = {0, 1, 2, …}`.
    pub fn deterministic(n_max: usize) -> Self {
        let mut law = Self::from_table(&[1.0]).unwrap();
        law.max_horizon = n_max.max(2);
        law.pmf.resize(law.max_horizon + 1, 0.0);
        law.survival.resize(law.max_horizon + 1, 0.0);
        law
    }

    pub fn is_tabulated(&self) -> bool {
        self.alpha.is_infinite()
    }

    /// `K(n)` for any `n ≥ 1`, beyond the table when the law is analytic.
    pub fn kernel_at(&self, n: u64) -> f64 {
        if (n as usize) <= self.max_horizon {
            self.pmf[n as usize]
        } else if self.is_tabulated() {
            0.0
        } else {
            let x = n as f64;
            self.slowly_varying.at(x) * x.powf(-1.0 - self.alpha) / self.normalization
        }
    }

    /// The effective slowly varying function `K(n) n^{1+α}` of the normalized law.
    pub fn effective_l(&self, n: f64) -> f64 {
        self.slowly_varying.at(n) / self.normalization
    }

    /// `P(τ₁ > n)` for any `n`.
    pub fn survival_at(&self, n: u64) -> f64 {
        if (n as usize) <= self.max_horizon {
            self.survival[n as usize]
        } else if self.is_tabulated() {
            self.survival[self.max_horizon]
        } else {
            power_log_sum(1.0 + self.alpha, self.slowly_varying.kappa(), n + 1) / self.normalization
        }
    }

    fn check_horizon(&self, n: usize) -> Result<()> {
        if n > self.max_horizon {
            return Err(Error::Input(format!(
                "horizon {n} exceeds the tabulated range N_max = {}",
                self.max_horizon
            )));
        }
        Ok(())
    }

    pub fn spec(&self) -> RenewalSpec {
        RenewalSpec {
            alpha: self.alpha,
            l: self.slowly_varying.to_string(),
            n_max: self.max_horizon,
        }
    }
}

/// `u(n) = P(n ∈ τ)` for `n = 0..=N`.
pub fn renewal_mass(law: &RenewalLaw, n: usize) -> Result<Vec<f64>> {
    law.check_horizon(n)?;
    let plan = ConvPlan::new(&law.pmf, n, DIRECT_RENEWAL_HORIZON);
    let sol = plan.solve(None, n);
    Ok(sol.scaled.into_iter().map(|u| u.clamp(0.0, 1.0)).collect())
}

/// `R_N = Σ_{n=1}^{N} u(n)²`, the mean overlap of two independent renewals.
pub fn pinning_overlap(law: &RenewalLaw, n: usize) -> Result<f64> {
    Ok(overlap_prefix(&renewal_mass(law, n)?)[n])
}

/// Partial sums `R_0, R_1, …` of `u(n)²` for a given mass function.
pub fn overlap_prefix(u: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(u.len());
    let mut total = 0.0;
    out.push(0.0);
    for &v in &u[1..] {
        total += v * v;
        out.push(total);
    }
    out
}

/// Renewal points in `[1, N]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenewalTrace {
    pub points: Vec<usize>,
    pub horizon: usize,
}

pub fn sample_renewal(law: &RenewalLaw, n: usize, key: StreamKey) -> Result<RenewalTrace> {
    law.check_horizon(n)?;
    let mut cursor = key.cursor();
    let mut points = Vec::new();
    let mut at = 0usize;
    loop {
        // τ₁ > j  iff  survival[j] > U, so the gap is the first j with survival[j] ≤ U
        let target = cursor.next_uniform();
        let remaining = n - at;
        if law.survival[remaining] > target {
            break;
        }
        let window = &law.survival[..=remaining];
        let gap = window.partition_point(|&s| s > target);
        at += gap.max(1);
        points.push(at);
        if at >= n {
            break;
        }
    }
    Ok(RenewalTrace { points, horizon: n })
}

/// `Σ_{n ≥ from} (1 + ln n)^κ n^{−s}` for `s > 1`, or `s = 1` with `κ < −1`.
pub(crate) fn power_log_sum(s: f64, kappa: f64, from: u64) -> f64 {
    let from = from.max(1);
    let cut = from.max(EXPLICIT_TERMS);
    let f = |x: f64| (1.0 + x.ln()).powf(kappa) * x.powf(-s);
    // explicit part, smallest terms first
    let mut explicit = 0.0;
    for n in (from..cut).rev() {
        explicit += f(n as f64);
    }
    let a = cut as f64;
    let y0 = 1.0 + a.ln();
    let integral = if s == 1.0 {
        y0.powf(kappa + 1.0) / (-kappa - 1.0)
    } else {
        let c = s - 1.0;
        if kappa == 0.0 {
            a.powf(-c) / c
        } else {
            // x = a e^{v/c}: a^{−c}/c · ∫_0^∞ (y0 + v/c)^κ e^{−v} dv
            let inner = semi_infinite(|v| (y0 + v / c).powf(kappa) * (-v).exp(), 0.0, 0.0, 1e-14)
                .map(|e| e.value)
                .unwrap_or(f64::NAN);
            a.powf(-c) / c * inner
        }
    };
    let ly = 1.0 + a.ln();
    let d1 = a.powf(-s - 1.0) * ly.powf(kappa - 1.0) * (kappa - s * ly);
    let d3 = if kappa == 0.0 { -s * (s + 1.0) * (s + 2.0) * a.powf(-s - 3.0) } else { 0.0 };
    explicit + integral + 0.5 * f(a) - d1 / 12.0 + d3 / 720.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn slowly_varying_round_trips() {
        for sv in [SlowlyVarying::Constant, SlowlyVarying::LogPower(-2.5)] {
            assert_eq!(sv.to_string().parse::<SlowlyVarying>().unwrap(), sv);
        }
        assert!("log(2)".parse::<SlowlyVarying>().is_err());
    }

    #[test]
    fn constant_tail_sum_matches_zeta() {
        assert_relative_eq!(power_log_sum(1.75, 0.0, 1), 1.962_320_099_451_34, max_relative = 1e-13);
        assert_relative_eq!(power_log_sum(2.5, 0.0, 1), 1.341_487_257_250_92, max_relative = 1e-13);
    }

    #[test]
    fn log_power_tail_matches_explicit_sum() {
        // compare the tail from 4096 with a long explicit sum plus a crude remainder
        let s = 3.0;
        let kappa = 1.5;
        let tail = power_log_sum(s, kappa, 10);
        let mut explicit = 0.0;
        for n in (10..2_000_000u64).rev() {
            let x = n as f64;
            explicit += (1.0 + x.ln()).powf(kappa) * x.powf(-s);
        }
        let x = 2.0e6f64;
        explicit += (1.0 + x.ln()).powf(kappa) * x.powf(1.0 - s) / (s - 1.0);
        assert_relative_eq!(tail, explicit, max_relative = 1e-9);
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(build_renewal_law(0.0, SlowlyVarying::Constant, 10).is_err());
        assert!(build_renewal_law(-1.0, SlowlyVarying::Constant, 10).is_err());
        assert!(build_renewal_law(0.5, SlowlyVarying::Constant, 1).is_err());
    }

    #[test]
    fn survival_is_consistent() {
        let law = build_renewal_law(0.75, SlowlyVarying::Constant, 1000).unwrap();
        assert_relative_eq!(law.survival[0], 1.0, max_relative = 1e-13);
        let direct: f64 = 1.0 - law.pmf.iter().sum::<f64>();
        assert_relative_eq!(law.survival[1000], direct, max_relative = 1e-9);
        assert_relative_eq!(law.survival_at(5000), 1.0 - (1..=5000).map(|n| law.kernel_at(n)).sum::<f64>(), max_relative = 1e-8);
    }

    #[test]
    fn deterministic_law_renews_everywhere() {
        let law = RenewalLaw::deterministic(20);
        let u = renewal_mass(&law, 20).unwrap();
        assert!(u.iter().all(|&v| v == 1.0));
        assert_eq!(pinning_overlap(&law, 20).unwrap(), 20.0);
        let trace = sample_renewal(&law, 20, StreamKey::new(1, 1)).unwrap();
        assert_eq!(trace.points, (1..=20).collect::<Vec<_>>());
    }

    #[test]
    fn sampling_is_deterministic_and_respects_horizon() {
        let law = build_renewal_law(0.5, SlowlyVarying::Constant, 500).unwrap();
        let a = sample_renewal(&law, 500, StreamKey::new(4, 4)).unwrap();
        let b = sample_renewal(&law, 500, StreamKey::new(4, 4)).unwrap();
        assert_eq!(a, b);
        assert!(a.points.windows(2).all(|w| w[0] < w[1]));
        assert!(a.points.iter().all(|&p| (1..=500).contains(&p)));
        assert!(sample_renewal(&law, 501, StreamKey::new(4, 4)).is_err());
    }

    #[test]
    fn fft_and_direct_mass_agree() {
        let law = build_renewal_law(0.6, SlowlyVarying::LogPower(1.0), 5000).unwrap();
        let direct = ConvPlan::new(&law.pmf, 5000, usize::MAX).solve(None, 5000).scaled;
        let fast = ConvPlan::new(&law.pmf, 5000, 0).solve(None, 5000).scaled;
        for n in 0..=5000 {
            assert!((direct[n] - fast[n]).abs() <= 1e-12 * direct[n], "{n}");
        }
    }
}
