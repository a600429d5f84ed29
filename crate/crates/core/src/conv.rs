//! Online convolution for renewal-type recursions
//!
//! ```text
//! y(0) = 1,    y(n) = a(n) · Σ_{m<n} y(m) K(n − m)
//! ```
//!
//! solved either by the direct O(N²) sum or by divide and conquer over
//! dyadic blocks, where each left half is pushed into the right half with
//! one FFT product of size twice the half length. Values are kept at a
//! common scale `exp(log_scale)` that is readjusted whenever they move far
//! from unity, so the recursion runs through `Z` spanning thousands of
//! orders of magnitude.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Block length below which the divide and conquer falls back to direct sums.
const LEAF: usize = 64;

/// Values are renormalized once `ln y` exceeds this.
const RESCALE_AT: f64 = 300.0;

/// Solution of the recursion up to a horizon.
#[derive(Clone, Debug)]
pub struct Solution {
    /// `y(n) · exp(−log_scale)` for `n = 0..=N`.
    pub scaled: Vec<f64>,
    pub log_scale: f64,
}

impl Solution {
    pub fn log_at(&self, n: usize) -> f64 {
        self.scaled[n].ln() + self.log_scale
    }
}

struct Level {
    half: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel_hat: Vec<Complex64>,
}

/// Precomputed kernel spectra for a fixed kernel and horizon.
pub struct ConvPlan {
    kernel: Vec<f64>,
    reversed: Vec<f64>,
    horizon: usize,
    levels: Vec<Level>,
    direct: bool,
}

impl std::fmt::Debug for ConvPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvPlan")
            .field("horizon", &self.horizon)
            .field("direct", &self.direct)
            .finish()
    }
}

impl ConvPlan {
    /// `kernel[j]` is `K(j)` for `j = 0..=horizon` (`kernel[0]` is ignored).
    ///
    /// The direct method is used when `horizon ≤ direct_up_to`.
    pub fn new(kernel: &[f64], horizon: usize, direct_up_to: usize) -> Self {
        assert!(kernel.len() > horizon, "kernel shorter than the horizon");
        let mut k = kernel[..=horizon].to_vec();
        k[0] = 0.0;
        let reversed: Vec<f64> = k.iter().rev().copied().collect();
        let direct = horizon <= direct_up_to.max(LEAF);
        let mut levels = Vec::new();
        if !direct {
            let mut planner = FftPlanner::new();
            let mut half = LEAF;
            while half < horizon + 1 {
                let size = 2 * half;
                let forward = planner.plan_fft_forward(size);
                let inverse = planner.plan_fft_inverse(size);
                let mut kernel_hat: Vec<Complex64> = (0..size)
                    .map(|j| Complex64::new(k.get(j).copied().unwrap_or(0.0), 0.0))
                    .collect();
                forward.process(&mut kernel_hat);
                let norm = 1.0 / size as f64;
                for c in kernel_hat.iter_mut() {
                    *c *= norm;
                }
                levels.push(Level {
                    half,
                    forward,
                    inverse,
                    kernel_hat,
                });
                half *= 2;
            }
        }
        ConvPlan {
            kernel: k,
            reversed,
            horizon,
            levels,
            direct,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Solves the recursion with `a(n) = exp(exponents[n − 1])`, or `a ≡ 1`
    /// when `exponents` is `None`.
    pub fn solve(&self, exponents: Option<&[f64]>, n: usize) -> Solution {
        assert!(n <= self.horizon);
        if let Some(e) = exponents {
            assert!(e.len() >= n, "exponent vector shorter than the horizon");
        }
        let mut state = State {
            y: vec![0.0; n + 1],
            acc: vec![0.0; n + 1],
            log_scale: 0.0,
            exponents,
        };
        state.y[0] = 1.0;
        if n > 0 {
            if self.direct {
                self.direct_range(&mut state, 1, n + 1, 0);
            } else {
                // acc receives y(0) = 1 through the first leaf directly
                self.divide(&mut state, 0, (n + 1).next_power_of_two(), n + 1);
            }
        }
        Solution {
            scaled: state.y,
            log_scale: state.log_scale,
        }
    }

    /// Plain O(N²) evaluation of `Σ_{m=from}^{n−1} y(m) K(n − m)` added to
    /// the pending sums for `n ∈ [lo, hi)`, solving each `y(n)` in turn.
    fn direct_range(&self, s: &mut State, lo: usize, hi: usize, from: usize) {
        let top = self.horizon;
        for n in lo.max(1)..hi {
            // K(n − m) for m in [from, n) is reversed[top − n + m]
            let ys = &s.y[from..n];
            let ks = &self.reversed[top - n + from..top];
            s.acc[n] += dot(ys, ks);
            s.finish(n);
        }
    }

    fn divide(&self, s: &mut State, l: usize, r: usize, end: usize) {
        if l >= end {
            return;
        }
        if r - l <= LEAF {
            let hi = r.min(end);
            self.direct_range(s, l, hi, l);
            return;
        }
        let mid = (l + r) / 2;
        self.divide(s, l, mid, end);
        if mid < end {
            self.push(s, l, mid, r.min(end));
        }
        self.divide(s, mid, r, end);
    }

    /// Adds the contribution of `y[l..mid]` to `acc[mid..hi]`.
    fn push(&self, s: &mut State, l: usize, mid: usize, hi: usize) {
        let half = mid - l;
        let level = self
            .levels
            .iter()
            .find(|lv| lv.half == half)
            .expect("missing FFT level");
        let size = 2 * half;
        let mut buf: Vec<Complex64> = (0..size)
            .map(|i| Complex64::new(if i < half { s.y[l + i] } else { 0.0 }, 0.0))
            .collect();
        level.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&level.kernel_hat) {
            *b *= k;
        }
        level.inverse.process(&mut buf);
        for n in mid..hi {
            s.acc[n] += buf[n - l].re;
        }
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }
}

struct State<'a> {
    y: Vec<f64>,
    acc: Vec<f64>,
    log_scale: f64,
    exponents: Option<&'a [f64]>,
}

impl State<'_> {
    fn finish(&mut self, n: usize) {
        let acc = self.acc[n].max(0.0);
        let Some(e) = self.exponents else {
            self.y[n] = acc;
            return;
        };
        let x = e[n - 1];
        let log_value = x + acc.ln();
        if log_value > RESCALE_AT {
            // bring y(n) to 1 and everything else by the same factor
            let half = (-0.5 * log_value).exp();
            for v in self.y[..n].iter_mut().chain(self.acc[n + 1..].iter_mut()) {
                *v = *v * half * half;
            }
            self.log_scale += log_value;
            self.y[n] = 1.0;
        } else {
            self.y[n] = log_value.exp();
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        s[0] += a[i] * b[i];
        s[1] += a[i + 1] * b[i + 1];
        s[2] += a[i + 2] * b[i + 2];
        s[3] += a[i + 3] * b[i + 3];
    }
    let mut total = (s[0] + s[1]) + (s[2] + s[3]);
    for i in 4 * chunks..a.len() {
        total += a[i] * b[i];
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(n: usize) -> Vec<f64> {
        let mut k: Vec<f64> = (0..=n).map(|j| if j == 0 { 0.0 } else { (j as f64).powf(-1.6) }).collect();
        let z: f64 = k.iter().sum::<f64>() * 1.3;
        k.iter_mut().for_each(|v| *v /= z);
        k
    }

    fn naive(k: &[f64], a: &[f64], n: usize) -> Vec<f64> {
        let mut y = vec![0.0; n + 1];
        y[0] = 1.0;
        for i in 1..=n {
            let s: f64 = (0..i).map(|m| y[m] * k[i - m]).sum();
            y[i] = a[i - 1].exp() * s;
        }
        y
    }

    #[test]
    fn divide_and_conquer_matches_direct() {
        let n = 700;
        let k = kernel(n);
        let a: Vec<f64> = (0..n).map(|i| 0.3 * ((i * 7 % 11) as f64 / 11.0 - 0.4)).collect();
        let reference = naive(&k, &a, n);
        let fast = ConvPlan::new(&k, n, 0).solve(Some(&a), n);
        let direct = ConvPlan::new(&k, n, usize::MAX).solve(Some(&a), n);
        for i in 0..=n {
            let f = fast.scaled[i] * fast.log_scale.exp();
            assert!((f / reference[i] - 1.0).abs() < 1e-11, "{i}: {f} {}", reference[i]);
            assert!((direct.scaled[i] / reference[i] - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn shorter_horizon_than_plan() {
        let k = kernel(300);
        let plan = ConvPlan::new(&k, 300, 0);
        let ones = vec![0.0; 300];
        let full = plan.solve(Some(&ones), 300);
        let part = plan.solve(Some(&ones), 129);
        for i in 0..=129 {
            assert!((full.scaled[i] - part.scaled[i]).abs() < 1e-14);
        }
        let unit = plan.solve(None, 300);
        assert_eq!(unit.log_scale, 0.0);
        for i in 0..=300 {
            assert!((unit.scaled[i] - full.scaled[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn rescaling_tracks_exponential_growth() {
        let n = 3000;
        let k = kernel(n);
        let a = vec![1.0; n];
        let fast = ConvPlan::new(&k, n, 0).solve(Some(&a), n);
        let direct = ConvPlan::new(&k, n, usize::MAX).solve(Some(&a), n);
        assert!(fast.log_at(n) > 700.0);
        for i in (1..=n).step_by(97) {
            assert!((fast.log_at(i) - direct.log_at(i)).abs() < 1e-10, "{i}");
        }
    }
}
