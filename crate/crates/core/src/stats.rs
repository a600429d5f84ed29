//! Empirical distribution tools: Kolmogorov–Smirnov distances and
//! mergeable moment accumulators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Asymptotic 1% critical value of the scaled KS statistic.
pub const KS_CRITICAL_1PCT: f64 = 1.63;

/// Streaming count, mean and central sums up to order four.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut acc = Self::new();
        xs.iter().for_each(|&x| acc.push(x));
        acc
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.count as f64;
        self.count += 1;
        let n = self.count as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let term1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += term1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += term1;
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let d4 = d2 * d2;
        let mean = self.mean + delta * nb / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3 + other.m3 + d3 * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;
        MomentAccumulator {
            count: self.count + other.count,
            mean,
            m2,
            m3,
            m4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub count: u64,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// `None` for a constant stream.
    pub skewness: Option<f64>,
    /// Raw standardized fourth moment (3 for a Gaussian), `None` for a constant stream.
    pub kurtosis: Option<f64>,
    pub stderr_mean: f64,
    pub stderr_variance: f64,
}

pub fn moment_summary(acc: &MomentAccumulator) -> Result<MomentSummary> {
    if acc.count < 4 {
        return Err(Error::Input(format!("moment summary needs at least 4 values, got {}", acc.count)));
    }
    let n = acc.count as f64;
    let variance = acc.m2 / (n - 1.0);
    let biased = acc.m2 / n;
    let (skewness, kurtosis) = if biased > 0.0 && biased > 1e-300 {
        (
            Some(acc.m3 / n / biased.powf(1.5)),
            Some(acc.m4 / n / (biased * biased)),
        )
    } else {
        (None, None)
    };
    let mu4 = acc.m4 / n;
    let var_of_var = ((mu4 - variance * variance * (n - 3.0) / (n - 1.0)) / n).max(0.0);
    Ok(MomentSummary {
        count: acc.count,
        mean: acc.mean,
        variance,
        skewness,
        kurtosis,
        stderr_mean: (variance / n).sqrt(),
        stderr_variance: var_of_var.sqrt(),
    })
}

/// Empirical CDF of a finite sample.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::Input("empirical CDF of an empty sample".into()));
        }
        if sample.iter().any(|x| x.is_nan()) {
            return Err(Error::Input("sample contains NaN".into()));
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { sorted })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Quantile by the lower order statistic.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let k = ((p * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[k - 1]
    }

    pub fn median(&self) -> f64 {
        let n = self.sorted.len();
        if n % 2 == 1 {
            self.sorted[n / 2]
        } else {
            0.5 * (self.sorted[n / 2 - 1] + self.sorted[n / 2])
        }
    }
}

/// `sup_x |F_n(x) − F(x)|` against a continuous reference CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], reference_cdf: F) -> Result<f64> {
    if sample.len() < 2 {
        return Err(Error::Input(format!("KS statistic needs at least 2 values, got {}", sample.len())));
    }
    let ecdf = EmpiricalCdf::new(sample)?;
    let n = ecdf.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in ecdf.sorted.iter().enumerate() {
        let f = reference_cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// Two-sample KS distance `sup_x |F_a(x) − F_b(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Input("two-sample KS needs at least 2 values per sample".into()));
    }
    let a = EmpiricalCdf::new(a)?;
    let b = EmpiricalCdf::new(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a.sorted[i].min(b.sorted[j]);
        while i < a.len() && a.sorted[i] <= x {
            i += 1;
        }
        while j < b.len() && b.sorted[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// 1% critical value for a one-sample test of size `n`.
pub fn ks_critical(n: usize) -> f64 {
    KS_CRITICAL_1PCT / (n as f64).sqrt()
}

/// 1% critical value for a two-sample test.
pub fn ks_critical_two_sample(n: usize, m: usize) -> f64 {
    KS_CRITICAL_1PCT * ((n + m) as f64 / (n * m) as f64).sqrt()
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean and standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// Sample Pearson correlation with its standard error under independence.
pub fn correlation(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (sab / (saa * sbb).sqrt(), 1.0 / n.sqrt())
}

/// Counts how many consecutive pairs break a monotone trend.
pub fn trend_violations(values: &[f64], decreasing: bool) -> usize {
    values
        .windows(2)
        .filter(|w| if decreasing { w[1] > w[0] } else { w[1] < w[0] })
        .count()
}
