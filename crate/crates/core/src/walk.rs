//! Lattice random walks: step laws, n-step kernels, paths and overlaps.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::gauss_kronrod;
use crate::rng::StreamKey;

/// Default truncation range of the stable step law.
pub const DEFAULT_X_MAX: u64 = 100_000;

/// Cells allowed in a single kernel window.
const WINDOW_BUDGET: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WalkFamily {
    Ssrw1d,
    Ssrw2d,
    /// Steps with `p(x) ∝ (1 + x²)^{−(1+α)/2}`, truncated at `|x| ≤ x_max`.
    ///
    /// `x_max = None` is supported for α = 1 only, where the characteristic
    /// function has the closed form `cosh(π − |θ|)/cosh π`.
    Stable1d { alpha: f64, x_max: Option<u64> },
}

/// Serializable walk description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// `0` requests the untruncated law.
    #[serde(rename = "X_max", default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<u64>,
}

impl WalkSpec {
    pub fn build(&self) -> Result<WalkLaw> {
        let family = match self.family.as_str() {
            "ssrw-1d" => WalkFamily::Ssrw1d,
            "ssrw-2d" => WalkFamily::Ssrw2d,
            "stable-1d" => {
                let alpha = self
                    .alpha
                    .ok_or_else(|| Error::validation("walk.alpha", "stable-1d requires alpha"))?;
                let x_max = match self.x_max {
                    None => Some(DEFAULT_X_MAX),
                    Some(0) => None,
                    Some(x) => Some(x),
                };
                WalkFamily::Stable1d { alpha, x_max }
            }
            other => return Err(Error::validation("walk.family", format!("unknown walk family `{other}`"))),
        };
        WalkLaw::new(family)
    }
}

/// A walk law with its tabulated step distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkLaw {
    pub family: WalkFamily,
    /// One-dimensional step pmf on `[−radius, radius]` (per coordinate in
    /// diagonal coordinates for the planar walk).
    pub step_pmf: Vec<f64>,
    pub step_radius: usize,
    pub period: u32,
    /// Cumulative law of `|X|` for inverse-transform sampling.
    abs_cdf: Vec<f64>,
    /// Normalizing constant of the untruncated Cauchy-like law.
    cauchy_c: f64,
    cauchy_bound: f64,
}

impl WalkLaw {
    pub fn new(family: WalkFamily) -> Result<Self> {
        let mut law = WalkLaw {
            family,
            step_pmf: Vec::new(),
            step_radius: 1,
            period: 2,
            abs_cdf: Vec::new(),
            cauchy_c: 0.0,
            cauchy_bound: 0.0,
        };
        match family {
            WalkFamily::Ssrw1d | WalkFamily::Ssrw2d => {
                law.step_pmf = vec![0.5, 0.0, 0.5];
            }
            WalkFamily::Stable1d { alpha, x_max } => {
                if !(1.0..2.0).contains(&alpha) {
                    return Err(Error::Domain(format!("stable walk exponent alpha = {alpha} must lie in [1, 2)")));
                }
                law.period = 1;
                match x_max {
                    Some(x_max) => {
                        if x_max < 1 || x_max as usize > WINDOW_BUDGET {
                            return Err(Error::Domain(format!("X_max = {x_max} outside [1, {WINDOW_BUDGET}]")));
                        }
                        let r = x_max as usize;
                        let weights: Vec<f64> = (0..=r).map(|x| stable_weight(alpha, x as f64)).collect();
                        // sum smallest first
                        let total = weights[0] + 2.0 * weights[1..].iter().rev().sum::<f64>();
                        let mut pmf = vec![0.0; 2 * r + 1];
                        for (x, w) in weights.iter().enumerate() {
                            pmf[r + x] = w / total;
                            pmf[r - x] = w / total;
                        }
                        let mut cdf = Vec::with_capacity(r + 1);
                        let mut acc = 0.0;
                        for (x, w) in weights.iter().enumerate() {
                            acc += if x == 0 { w / total } else { 2.0 * w / total };
                            cdf.push(acc);
                        }
                        *cdf.last_mut().unwrap() = 1.0;
                        law.step_pmf = pmf;
                        law.step_radius = r;
                        law.abs_cdf = cdf;
                    }
                    None => {
                        if alpha != 1.0 {
                            return Err(Error::Domain(
                                "an untruncated stable step law is available for alpha = 1 only".into(),
                            ));
                        }
                        law.cauchy_c = 1.0 / (PI / PI.tanh());
                        law.cauchy_bound = (0..64)
                            .map(|x| law.cauchy_c / (1.0 + (x * x) as f64) / rounded_cauchy_pmf(x as f64))
                            .fold(0.0, f64::max)
                            .max(PI * law.cauchy_c)
                            * (1.0 + 1e-12);
                        law.step_radius = 0;
                    }
                }
            }
        }
        Ok(law)
    }

    pub fn ssrw1d() -> Self {
        Self::new(WalkFamily::Ssrw1d).unwrap()
    }

    pub fn ssrw2d() -> Self {
        Self::new(WalkFamily::Ssrw2d).unwrap()
    }

    pub fn dim(&self) -> usize {
        match self.family {
            WalkFamily::Ssrw2d => 2,
            _ => 1,
        }
    }

    pub fn is_ssrw(&self) -> bool {
        matches!(self.family, WalkFamily::Ssrw1d | WalkFamily::Ssrw2d)
    }

    pub fn is_untruncated(&self) -> bool {
        matches!(self.family, WalkFamily::Stable1d { x_max: None, .. })
    }

    pub fn spec(&self) -> WalkSpec {
        match self.family {
            WalkFamily::Ssrw1d => WalkSpec { family: "ssrw-1d".into(), alpha: None, x_max: None },
            WalkFamily::Ssrw2d => WalkSpec { family: "ssrw-2d".into(), alpha: None, x_max: None },
            WalkFamily::Stable1d { alpha, x_max } => WalkSpec {
                family: "stable-1d".into(),
                alpha: Some(alpha),
                x_max: Some(x_max.unwrap_or(0)),
            },
        }
    }

    /// Characteristic function `E[cos(θX)]` of one step (one coordinate).
    pub fn characteristic(&self, theta: f64) -> f64 {
        match self.family {
            WalkFamily::Ssrw1d | WalkFamily::Ssrw2d => theta.cos(),
            WalkFamily::Stable1d { x_max: None, .. } => {
                let t = theta.abs() % (2.0 * PI);
                let t = t.min(2.0 * PI - t);
                // cosh(π − t)/cosh π without overflow
                let a = (-t).exp() * (1.0 + (-2.0 * (PI - t)).exp());
                a / (1.0 + (-2.0 * PI).exp())
            }
            WalkFamily::Stable1d { .. } => {
                let r = self.step_radius;
                let c1 = theta.cos();
                let (mut prev, mut cur) = (1.0, c1);
                let mut sum = self.step_pmf[r];
                for x in 1..=r {
                    sum += 2.0 * self.step_pmf[r + x] * cur;
                    let next = 2.0 * c1 * cur - prev;
                    prev = cur;
                    cur = next;
                }
                sum
            }
        }
    }

    fn cauchy_step(&self, cursor: &mut crate::rng::Cursor) -> i64 {
        loop {
            let u = cursor.next_uniform();
            let v = cursor.next_uniform();
            let y = (PI * (u - 0.5)).tan().round();
            if !y.is_finite() || y.abs() > 1e15 {
                continue;
            }
            let target = self.cauchy_c / (1.0 + y * y);
            if v * self.cauchy_bound * rounded_cauchy_pmf(y) <= target {
                return y as i64;
            }
        }
    }
}

fn stable_weight(alpha: f64, x: f64) -> f64 {
    (1.0 + x * x).powf(-0.5 * (1.0 + alpha))
}

/// `P(round(C) = x)` for a standard Cauchy `C`.
fn rounded_cauchy_pmf(x: f64) -> f64 {
    let a = x.abs();
    // atan(a + ½) − atan(a − ½) = atan(1 / (a² + ¾))
    (1.0 / (a * a + 0.75)).atan() / PI
}

/// `q_n` on a window, with the probability mass that fell outside it.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelColumn {
    pub n: usize,
    pub dim: usize,
    /// Values cover `[−radius, radius]^dim`, stored row-major with the last
    /// coordinate fastest.
    pub radius: usize,
    pub values: Vec<f64>,
    pub truncation_mass: f64,
}

impl KernelColumn {
    pub fn get(&self, x: &[i64]) -> f64 {
        let r = self.radius as i64;
        if x.len() != self.dim || x.iter().any(|c| c.abs() > r) {
            return 0.0;
        }
        let side = 2 * self.radius + 1;
        let mut index = 0usize;
        for &c in x {
            index = index * side + (c + r) as usize;
        }
        self.values[index]
    }

    /// `Σ_x q_n(x)²` over the window.
    pub fn square_sum(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// `q_n(x) = P(S_n = x)` with at most `tol` of the mass outside the window.
pub fn kernel_column(walk: &WalkLaw, n: usize, tol: f64) -> Result<KernelColumn> {
    if n == 0 {
        return Err(Error::Domain("kernel columns start at n = 1".into()));
    }
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(Error::Domain(format!("tolerance {tol} outside (0, 1e-3]")));
    }
    match walk.family {
        WalkFamily::Ssrw1d => ssrw_column(n, tol).map(|(radius, values, lost)| KernelColumn {
            n,
            dim: 1,
            radius,
            values,
            truncation_mass: lost,
        }),
        WalkFamily::Ssrw2d => {
            // diagonal coordinates are two independent one-dimensional walks
            let (r1, line, lost) = ssrw_column(n, tol / 2.0)?;
            let side1 = 2 * r1 + 1;
            let radius = r1;
            let side = 2 * radius + 1;
            if side * side > WINDOW_BUDGET {
                return Err(Error::Resource(format!("planar kernel window at n = {n} exceeds the budget")));
            }
            let mut values = vec![0.0; side * side];
            let r = radius as i64;
            for iu in 0..side1 {
                let u = iu as i64 - r1 as i64;
                if line[iu] == 0.0 {
                    continue;
                }
                for iv in 0..side1 {
                    let v = iv as i64 - r1 as i64;
                    if line[iv] == 0.0 || (u + v) % 2 != 0 {
                        continue;
                    }
                    let x1 = (u + v) / 2;
                    let x2 = (u - v) / 2;
                    if x1.abs() <= r && x2.abs() <= r {
                        values[((x1 + r) as usize) * side + (x2 + r) as usize] = line[iu] * line[iv];
                    }
                }
            }
            let kept: f64 = values.iter().sum();
            let truncation_mass = (1.0 - kept).max(0.0);
            let _ = lost;
            Ok(KernelColumn {
                n,
                dim: 2,
                radius,
                values,
                truncation_mass,
            })
        }
        WalkFamily::Stable1d { x_max: None, .. } => Err(Error::Domain(
            "kernel columns of the untruncated step law are not tabulated; use a finite X_max".into(),
        )),
        WalkFamily::Stable1d { .. } => stable_column(walk, n, tol),
    }
}

/// Pascal-triangle column of the simple walk on `[−w, w]` with an adaptive
/// window `w(m) = min(m, c√m)` applied at every step.
fn ssrw_column(n: usize, tol: f64) -> Result<(usize, Vec<f64>, f64)> {
    let mut c = 4.0;
    loop {
        let (radius, values, lost) = ssrw_windowed(n, c);
        if lost <= tol {
            return Ok((radius, values, lost));
        }
        c += 1.0;
        if c > 40.0 {
            return Err(Error::Resource(format!("no window meets the tolerance at n = {n}")));
        }
    }
}

/// Half-width of the simple-walk window at time `m`.
pub(crate) fn ssrw_window(m: usize, c: f64) -> usize {
    ((c * (m as f64).sqrt()).ceil() as usize).min(m)
}

fn ssrw_windowed(n: usize, c: f64) -> (usize, Vec<f64>, f64) {
    let radius = ssrw_window(n, c);
    if 2 * radius + 1 > WINDOW_BUDGET {
        return (radius, Vec::new(), f64::INFINITY);
    }
    // compressed index i ↔ x = 2i − m
    let mut layer = vec![1.0f64];
    for m in 1..=n {
        let w = ssrw_window(m, c) as i64;
        let mut next = vec![0.0; m + 1];
        for (i, slot) in next.iter_mut().enumerate() {
            let x = 2 * i as i64 - m as i64;
            if x.abs() > w {
                continue;
            }
            let left = if i >= 1 { layer[i - 1] } else { 0.0 };
            let right = layer.get(i).copied().unwrap_or(0.0);
            *slot = 0.5 * (left + right);
        }
        layer = next;
    }
    let mut values = vec![0.0; 2 * radius + 1];
    let mut kept = 0.0;
    for (i, &q) in layer.iter().enumerate() {
        let x = 2 * i as i64 - n as i64;
        if x.abs() <= radius as i64 {
            values[(x + radius as i64) as usize] = q;
            kept += q;
        }
    }
    (radius, values, (1.0 - kept).max(0.0))
}

fn stable_column(walk: &WalkLaw, n: usize, tol: f64) -> Result<KernelColumn> {
    let r = walk.step_radius;
    let mut radius = (64.0 * (n as f64).powf(1.0 / walk_alpha(walk))).ceil() as usize;
    radius = radius.min(n * r).max(r.min(64));
    loop {
        if 2 * radius + 1 > WINDOW_BUDGET {
            return Err(Error::Resource(format!("stable kernel window at n = {n} exceeds the budget")));
        }
        let values = stable_windowed(walk, n, radius);
        let kept: f64 = values.iter().sum();
        let lost = (1.0 - kept).max(0.0);
        if lost <= tol || radius >= n * r {
            return Ok(KernelColumn {
                n,
                dim: 1,
                radius,
                values,
                truncation_mass: lost,
            });
        }
        radius = (radius * 2).min(n * r);
    }
}

fn walk_alpha(walk: &WalkLaw) -> f64 {
    match walk.family {
        WalkFamily::Stable1d { alpha, .. } => alpha,
        _ => 2.0,
    }
}

/// Iterated convolution of the step law restricted to `[−radius, radius]`.
pub(crate) fn stable_windowed(walk: &WalkLaw, n: usize, radius: usize) -> Vec<f64> {
    let side = 2 * radius + 1;
    let r = walk.step_radius;
    // step entries that can land inside the window from inside it
    let reach = r.min(2 * radius);
    let step = &walk.step_pmf[r - reach..=r + reach];
    let mut layer = vec![0.0; side];
    layer[radius] = 1.0;
    let mut conv = WindowConvolver::new(side, step.len());
    for _ in 0..n {
        layer = conv.apply(&layer, step, reach);
    }
    layer
}

/// Linear convolution `out[i] = Σ_j layer[i + reach − j] step[j]` cropped to
/// the input window, by FFT for long inputs.
pub(crate) struct WindowConvolver {
    size: usize,
    forward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inverse: std::sync::Arc<dyn rustfft::Fft<f64>>,
    step_hat: Option<Vec<Complex64>>,
    direct: bool,
}

impl WindowConvolver {
    pub(crate) fn new(side: usize, step_len: usize) -> Self {
        let size = (side + step_len).next_power_of_two();
        let mut planner = FftPlanner::new();
        WindowConvolver {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
            step_hat: None,
            direct: step_len <= 32 || side * step_len <= 4096,
        }
    }

    pub(crate) fn apply(&mut self, layer: &[f64], step: &[f64], reach: usize) -> Vec<f64> {
        let side = layer.len();
        if self.direct {
            let mut out = vec![0.0; side];
            for (i, &z) in layer.iter().enumerate() {
                if z == 0.0 {
                    continue;
                }
                for (j, &p) in step.iter().enumerate() {
                    let k = i as i64 + j as i64 - reach as i64;
                    if k >= 0 && (k as usize) < side {
                        out[k as usize] += z * p;
                    }
                }
            }
            return out;
        }
        let size = self.size;
        if self.step_hat.is_none() {
            let mut s: Vec<Complex64> = (0..size)
                .map(|j| Complex64::new(step.get(j).copied().unwrap_or(0.0) / size as f64, 0.0))
                .collect();
            self.forward.process(&mut s);
            self.step_hat = Some(s);
        }
        let mut buf: Vec<Complex64> = (0..size)
            .map(|i| Complex64::new(layer.get(i).copied().unwrap_or(0.0), 0.0))
            .collect();
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(self.step_hat.as_ref().unwrap()) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        (0..side).map(|i| buf[i + reach].re.max(0.0)).collect()
    }
}

/// `Σ_x q_n(x)²` for `n = 0..=N` (`n = 0` gives 1) for the simple walks,
/// from `P(S_{2n} = 0)` of a one-dimensional walk.
pub fn ssrw_square_sums(walk: &WalkLaw, n: usize) -> Result<Vec<f64>> {
    if !walk.is_ssrw() {
        return Err(Error::Input("closed-form overlap terms exist for the simple walks only".into()));
    }
    let mut out = Vec::with_capacity(n + 1);
    let mut s = 1.0f64;
    out.push(1.0);
    for m in 1..=n {
        s *= (2 * m - 1) as f64 / (2 * m) as f64;
        out.push(if walk.dim() == 2 { s * s } else { s });
    }
    Ok(out)
}

/// `R_N = Σ_{n=1}^{N} Σ_x q_n(x)²`.
pub fn polymer_overlap(walk: &WalkLaw, n: usize, tol: f64) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(Error::Domain(format!("tolerance {tol} outside (0, 1e-3]")));
    }
    if walk.is_ssrw() {
        return Ok(ssrw_square_sums(walk, n)?[1..].iter().sum());
    }
    // Parseval: Σ_x q_n(x)² = (1/π) ∫_0^π φ(θ)^{2n} dθ, summed in closed form over n
    let nn = n as f64;
    let integrand = |theta: f64| {
        let p2 = walk.characteristic(theta).powi(2);
        if p2 >= 1.0 {
            return nn;
        }
        let one_minus = 1.0 - p2;
        // p2 (1 − p2^N)/(1 − p2) with care near θ = 0
        let ln_p2 = p2.ln();
        -p2 * (nn * ln_p2).exp_m1() / one_minus
    };
    // integrate in log θ to resolve the peak of width N^{−1/α} at the origin
    let lo = (1e-3 / nn).min(1e-6).ln();
    let hi = PI.ln();
    let part = gauss_kronrod(|s: f64| integrand(s.exp()) * s.exp(), lo, hi, 0.0, 1e-10)?;
    let head = nn * lo.exp();
    Ok((part.value + head) / PI)
}

/// One path `S_0 = 0, S_1, …, S_N`; the second coordinate is 0 in one dimension.
pub fn sample_path(walk: &WalkLaw, n: usize, key: StreamKey) -> Result<Vec<[i64; 2]>> {
    let mut cursor = key.cursor();
    let mut path = Vec::with_capacity(n + 1);
    let mut at = [0i64, 0i64];
    path.push(at);
    for _ in 0..n {
        match walk.family {
            WalkFamily::Ssrw1d => {
                at[0] += if cursor.next_uniform() < 0.5 { -1 } else { 1 };
            }
            WalkFamily::Ssrw2d => {
                let k = (cursor.next_u64() >> 62) as usize;
                let (dx, dy) = [(1, 0), (-1, 0), (0, 1), (0, -1)][k];
                at[0] += dx;
                at[1] += dy;
            }
            WalkFamily::Stable1d { x_max: Some(_), .. } => {
                let u = cursor.next_uniform();
                let a = walk.abs_cdf.partition_point(|&c| c < u) as i64;
                let sign = if cursor.next_uniform() < 0.5 { -1 } else { 1 };
                at[0] += sign * a;
            }
            WalkFamily::Stable1d { x_max: None, .. } => {
                at[0] += walk.cauchy_step(&mut cursor);
            }
        }
        path.push(at);
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simple_walk_small_columns() {
        let w = WalkLaw::ssrw1d();
        let q1 = kernel_column(&w, 1, 1e-6).unwrap();
        assert_eq!(q1.get(&[1]), 0.5);
        assert_eq!(q1.get(&[-1]), 0.5);
        let q2 = kernel_column(&w, 2, 1e-6).unwrap();
        assert_eq!(q2.get(&[0]), 0.5);
        assert_eq!(q2.get(&[2]), 0.25);
        let p = WalkLaw::ssrw2d();
        let p2 = kernel_column(&p, 2, 1e-6).unwrap();
        assert_eq!(p2.get(&[0, 0]), 0.25);
        assert_eq!(p2.get(&[1, 1]), 0.125);
        assert_eq!(p2.get(&[2, 0]), 0.0625);
        assert_eq!(polymer_overlap(&p, 1, 1e-6).unwrap(), 0.25);
    }

    #[test]
    fn windows_respect_tolerance() {
        for n in [10, 100, 1000] {
            let c = kernel_column(&WalkLaw::ssrw1d(), n, 1e-8).unwrap();
            assert!(c.truncation_mass <= 1e-8);
            assert_relative_eq!(c.total() + c.truncation_mass, 1.0, epsilon = 1e-12);
        }
        assert!(kernel_column(&WalkLaw::ssrw1d(), 5, 0.1).is_err());
    }

    #[test]
    fn column_square_sums_match_closed_form() {
        let w = WalkLaw::ssrw2d();
        let exact = ssrw_square_sums(&w, 40).unwrap();
        for n in [1, 7, 40] {
            let c = kernel_column(&w, n, 1e-10).unwrap();
            assert_relative_eq!(c.square_sum(), exact[n], max_relative = 1e-9);
        }
    }

    #[test]
    fn stable_law_is_symmetric_and_normalized() {
        let w = WalkLaw::new(WalkFamily::Stable1d { alpha: 1.5, x_max: Some(1000) }).unwrap();
        let total: f64 = w.step_pmf.iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-14);
        for x in 0..=1000 {
            assert_eq!(w.step_pmf[1000 + x], w.step_pmf[1000 - x]);
        }
        assert!(WalkLaw::new(WalkFamily::Stable1d { alpha: 2.5, x_max: Some(10) }).is_err());
        assert!(WalkLaw::new(WalkFamily::Stable1d { alpha: 1.5, x_max: None }).is_err());
    }

    #[test]
    fn untruncated_characteristic_function_matches_series() {
        let w = WalkLaw::new(WalkFamily::Stable1d { alpha: 1.0, x_max: None }).unwrap();
        let c = w.cauchy_c;
        for &t in &[0.0, 0.3, 1.0, 2.5, PI] {
            let mut s = c;
            for x in 1..2_000_000u64 {
                s += 2.0 * c * (t * x as f64).cos() / (1.0 + (x * x) as f64);
            }
            assert!((w.characteristic(t) - s).abs() < 2e-6, "{t}");
        }
        assert_relative_eq!(w.characteristic(0.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn spectral_overlap_matches_columns() {
        let w = WalkLaw::new(WalkFamily::Stable1d { alpha: 1.2, x_max: Some(40) }).unwrap();
        let mut direct = 0.0;
        for n in 1..=12 {
            direct += kernel_column(&w, n, 1e-12).unwrap().square_sum();
        }
        assert_relative_eq!(polymer_overlap(&w, 12, 1e-6).unwrap(), direct, max_relative = 1e-8);
        let s = WalkLaw::ssrw1d();
        let spectral_like: f64 = (1..=12).map(|n| kernel_column(&s, n, 1e-12).unwrap().square_sum()).sum();
        assert_relative_eq!(polymer_overlap(&s, 12, 1e-6).unwrap(), spectral_like, max_relative = 1e-12);
    }

    #[test]
    fn paths_have_the_right_parity_and_are_reproducible() {
        let w = WalkLaw::ssrw1d();
        let p = sample_path(&w, 200, StreamKey::new(3, 7)).unwrap();
        for (n, x) in p.iter().enumerate() {
            assert_eq!((x[0] + n as i64).rem_euclid(2), 0);
        }
        assert_eq!(p, sample_path(&w, 200, StreamKey::new(3, 7)).unwrap());
        let c = WalkLaw::new(WalkFamily::Stable1d { alpha: 1.0, x_max: None }).unwrap();
        let a = sample_path(&c, 100, StreamKey::new(1, 2)).unwrap();
        assert_eq!(a, sample_path(&c, 100, StreamKey::new(1, 2)).unwrap());
    }

    #[test]
    fn cauchy_rejection_bound_dominates() {
        let c = WalkLaw::new(WalkFamily::Stable1d { alpha: 1.0, x_max: None }).unwrap();
        assert!(c.cauchy_bound > 1.0 && c.cauchy_bound < 1.1, "{}", c.cauchy_bound);
        for x in 0..10_000 {
            let x = x as f64;
            assert!(c.cauchy_c / (1.0 + x * x) <= c.cauchy_bound * rounded_cauchy_pmf(x));
        }
    }
}
