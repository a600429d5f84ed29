//! One-dimensional quadrature: adaptive Gauss–Kronrod for smooth
//! integrands and tanh-sinh for integrable endpoint singularities.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Integral estimate with an error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Estimate {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Estimate {
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    }
}

/// Adaptive Gauss–Kronrod (7, 15) on `[a, b]`, bisecting the worst
/// interval until the summed error is below `max(abs_tol, rel_tol·|I|)`.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate> {
    const MAX_INTERVALS: usize = 2000;
    let mut parts = vec![(a, b, kronrod15(&f, a, b))];
    loop {
        let value: f64 = parts.iter().map(|p| p.2.value).sum();
        let error: f64 = parts.iter().map(|p| p.2.error).sum();
        let target = abs_tol.max(rel_tol * value.abs());
        if error <= target {
            return Ok(Estimate { value, error });
        }
        if parts.len() >= MAX_INTERVALS || !value.is_finite() {
            return Err(Error::Quadrature {
                achieved: error,
                requested: target,
            });
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.error.total_cmp(&y.1 .2.error))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        parts.push((lo, mid, kronrod15(&f, lo, mid)));
        parts.push((mid, hi, kronrod15(&f, mid, hi)));
    }
}

/// `∫_a^∞ f` through the map `x = a + s/(1 − s)`.
pub fn semi_infinite<F: Fn(f64) -> f64>(f: F, a: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate> {
    gauss_kronrod(
        |s| {
            if s >= 1.0 {
                return 0.0;
            }
            let d = 1.0 - s;
            let v = f(a + s / d) / (d * d);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// Double-exponential quadrature on `[a, b]`.
///
/// `f` receives the abscissa together with its distances to both endpoints,
/// computed without cancellation, so integrands like `s^{−1/2} g(t − s)` stay
/// accurate near either end.
pub fn tanh_sinh<F: Fn(f64, f64, f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<Estimate> {
    const T_MAX: f64 = 6.0;
    const MAX_LEVEL: u32 = 12;
    let half = 0.5 * (b - a);
    let node = |t: f64| -> f64 {
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        let q = (-2.0 * u.abs()).exp();
        // 1 − |x̂| and the weight dx̂/dt
        let gap = 2.0 * q / (1.0 + q);
        let weight = std::f64::consts::FRAC_PI_2 * t.cosh() * 4.0 * q / ((1.0 + q) * (1.0 + q));
        if gap == 0.0 || weight == 0.0 {
            return 0.0;
        }
        let (x, da, db) = if t < 0.0 {
            let d = half * gap;
            (a + d, d, b - a - d)
        } else {
            let d = half * gap;
            (b - d, b - a - d, d)
        };
        let v = f(x, da, db);
        if v.is_finite() {
            v * weight
        } else {
            0.0
        }
    };
    let mut h = 1.0f64;
    let mut sum = node(0.0);
    let mut k = 1;
    while k as f64 * h <= T_MAX {
        let t = k as f64 * h;
        sum += node(t) + node(-t);
        k += 1;
    }
    let mut previous = sum * h * half;
    for _ in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= T_MAX {
            let t = k as f64 * h;
            sum += node(t) + node(-t);
            k += 2;
        }
        let current = sum * h * half;
        let error = (current - previous).abs();
        if error <= rel_tol * current.abs() || error == 0.0 {
            return Ok(Estimate { value: current, error });
        }
        previous = current;
    }
    Err(Error::Quadrature {
        achieved: (previous - sum * h * half).abs().max(f64::EPSILON) / previous.abs().max(f64::MIN_POSITIVE),
        requested: rel_tol,
    })
}
