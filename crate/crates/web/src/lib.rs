//! WebAssembly bindings for a handful of quick computations. Results are
//! returned as JSON strings so the page needs no extra glue.

use disorder_lab::disorder::{log_mgf, DisorderSpec};
use disorder_lab::marginal::{limit_lognormal_params, marginal_beta, MarginalModel};
use disorder_lab::renewal::{build_renewal_law, pinning_overlap, SlowlyVarying};
use disorder_lab::stats::mean_stderr;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest horizon the page may request; keeps the tab responsive.
pub const MAX_N: usize = 1 << 14;
pub const MAX_SAMPLES: usize = 5_000;

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(js)
}

#[derive(Serialize)]
struct Limit {
    beta_hat: f64,
    sigma_sq: f64,
    second_moment: f64,
    degenerate: bool,
}

/// Parameters of the lognormal limit at `beta_hat`.
#[wasm_bindgen]
pub fn lognormal_limit(beta_hat: f64) -> Result<String, JsError> {
    let l = limit_lognormal_params(beta_hat).map_err(js)?;
    to_json(&Limit {
        beta_hat,
        sigma_sq: l.sigma_sq,
        second_moment: l.second_moment(),
        degenerate: l.degenerate,
    })
}

#[derive(Serialize)]
struct Overlap {
    n: usize,
    overlap: f64,
}

/// Expected replica overlap `R_N` of the pinning renewal, at each power of two up to `n`.
#[wasm_bindgen]
pub fn overlap_curve(alpha: f64, n: usize) -> Result<String, JsError> {
    if n < 1 || n > MAX_N {
        return Err(JsError::new(&format!("N must lie in [1, {MAX_N}]")));
    }
    let law = build_renewal_law(alpha, SlowlyVarying::Constant, n).map_err(js)?;
    let mut rows = Vec::new();
    let mut m = 1;
    while m <= n {
        rows.push(Overlap { n: m, overlap: pinning_overlap(&law, m).map_err(js)? });
        m *= 2;
    }
    to_json(&rows)
}

#[derive(Serialize)]
struct Samples {
    beta: f64,
    overlap: f64,
    mean: f64,
    stderr: f64,
    second_moment: f64,
    limit_second_moment: f64,
    values: Vec<f64>,
}

/// Normalized pinning partition functions at the marginal coupling
/// `β = β̂ R_N^{-1/2}` with Gaussian disorder.
#[wasm_bindgen]
pub fn pinning_samples(alpha: f64, beta_hat: f64, n: usize, samples: usize, seed: u64) -> Result<String, JsError> {
    if n < 1 || n > MAX_N || samples < 2 || samples > MAX_SAMPLES {
        return Err(JsError::new(&format!("need 1 ≤ N ≤ {MAX_N} and 2 ≤ samples ≤ {MAX_SAMPLES}")));
    }
    let law = build_renewal_law(alpha, SlowlyVarying::Constant, n).map_err(js)?;
    let spec = DisorderSpec::gaussian();
    let model = MarginalModel::Pinning { law };
    let overlap = model.overlap(n).map_err(js)?;
    let beta = marginal_beta(beta_hat, overlap).map_err(js)?;
    let shift = log_mgf(&spec, beta).map_err(js)?;
    let values = model.sample_z(&spec, beta, shift, n, samples, seed).map_err(js)?;
    let (mean, stderr) = mean_stderr(&values);
    let second_moment = values.iter().map(|z| z * z).sum::<f64>() / values.len() as f64;
    to_json(&Samples {
        beta,
        overlap,
        mean,
        stderr,
        second_moment,
        limit_second_moment: limit_lognormal_params(beta_hat).map_err(js)?.second_moment(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_have_mean_near_one() {
        let out: serde_json::Value = serde_json::from_str(&pinning_samples(0.5, 0.5, 256, 400, 7).unwrap()).unwrap();
        let mean = out["mean"].as_f64().unwrap();
        let se = out["stderr"].as_f64().unwrap();
        assert!((mean - 1.0).abs() < 4.0 * se, "{mean} ± {se}");
        assert_eq!(out["values"].as_array().unwrap().len(), 400);
    }

    #[test]
    fn overlap_curve_is_increasing() {
        let rows: serde_json::Value = serde_json::from_str(&overlap_curve(0.5, 1024).unwrap()).unwrap();
        let r: Vec<f64> = rows.as_array().unwrap().iter().map(|x| x["overlap"].as_f64().unwrap()).collect();
        assert_eq!(r.len(), 11);
        assert!(r.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn limit_matches_closed_form() {
        let v: serde_json::Value = serde_json::from_str(&lognormal_limit(0.5).unwrap()).unwrap();
        assert!((v["second_moment"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-12);
    }
}
