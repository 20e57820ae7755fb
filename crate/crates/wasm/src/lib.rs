//! Browser bindings: every export takes plain numbers and returns a JSON
//! string, or throws the error message.

use serde_json::{json, Value};
use tailmean::cml::{br_mean_from, cml_solve};
use tailmean::ksel::{default_k_range, reiss_thomas};
use tailmean::{confidence_interval, peng_mean, weissman_quantile, Error, HeavyTailModel, SortedSample};
use wasm_bindgen::prelude::*;

fn frechet_sample(alpha: f64, n: usize, seed: u64) -> Result<(HeavyTailModel, SortedSample), Error> {
    if n < 50 {
        return Err(Error::Config(format!("n = {n} is below 50")));
    }
    let model = HeavyTailModel::frechet(alpha)?;
    Ok((model, model.sample(n, seed)))
}

/// `k = 0` selects Reiss–Thomas.
fn resolve_k(sample: &SortedSample, k: usize, theta: f64) -> Result<usize, Error> {
    if k > 0 {
        return Ok(k);
    }
    let (lo, hi) = default_k_range(sample.n());
    Ok(reiss_thomas(sample, theta, lo, hi)?.k_star)
}

fn err_value(e: &Error) -> Value {
    json!({ "error": e.to_string() })
}

pub fn estimate_value(alpha: f64, n: usize, seed: u64, k: usize, level: f64) -> Result<Value, Error> {
    let (model, sample) = frechet_sample(alpha, n, seed)?;
    let k = resolve_k(&sample, k, 0.3)?;
    let peng = peng_mean(&sample, k);
    let cml = cml_solve(&sample, k);
    let br = cml.as_ref().map_err(Clone::clone).and_then(|c| br_mean_from(&sample, c));
    let ci = br.as_ref().map_err(Clone::clone).and_then(|b| confidence_interval(b, k, n, level));
    Ok(json!({
        "k": k,
        "true_mean": model.true_mean().ok(),
        "sample_mean": sample.mean(),
        "hill_alpha": tailmean::hill(&sample, k)?,
        "peng": peng.map(|p| json!(p)).unwrap_or_else(|e| err_value(&e)),
        "cml": cml.map(|c| json!(c)).unwrap_or_else(|e| err_value(&e)),
        "br": br.map(|b| json!(b)).unwrap_or_else(|e| err_value(&e)),
        "ci": ci.map(|c| json!(c)).unwrap_or_else(|e| err_value(&e)),
    }))
}

pub fn k_path_value(alpha: f64, n: usize, seed: u64, theta: f64) -> Result<Value, Error> {
    let (_, sample) = frechet_sample(alpha, n, seed)?;
    let (lo, hi) = default_k_range(n);
    let sel = reiss_thomas(&sample, theta, lo, hi)?;
    let path: Vec<Value> = sel
        .alpha_path
        .iter()
        .map(|p| json!({ "i": p.i, "alpha": p.alpha, "fallback": p.fallback }))
        .collect();
    let objective: Vec<Value> = sel.objective_values.iter().map(|(k, v)| json!({ "k": k, "objective": v })).collect();
    Ok(json!({ "k_star": sel.k_star, "theta": sel.theta, "alpha_path": path, "objective": objective }))
}

pub fn quantile_curves_value(alpha: f64, n: usize, seed: u64, k: usize, points: usize) -> Result<Value, Error> {
    let (model, sample) = frechet_sample(alpha, n, seed)?;
    let k = resolve_k(&sample, k, 0.3)?;
    let cml = cml_solve(&sample, k).ok();
    let top = k as f64 / n as f64;
    let bottom = top * 1e-3;
    let points = points.clamp(2, 500);
    let rows: Vec<Value> = (0..points)
        .map(|j| {
            let s = bottom * (top / bottom).powf(j as f64 / (points - 1) as f64);
            let s = s.min(top);
            json!({
                "s": s,
                "true": model.quantile(1.0 - s).ok(),
                "weissman": weissman_quantile(&sample, k, s).ok(),
                "lpy": cml.and_then(|c| c.quantile(s).ok()),
            })
        })
        .collect();
    Ok(json!({ "k": k, "curves": rows }))
}

fn export(v: Result<Value, Error>) -> Result<String, JsValue> {
    v.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Draws a Fréchet sample and returns Hill, Peng, CML and bias-reduced
/// estimates with the confidence interval at `level`.
#[wasm_bindgen]
pub fn estimate(alpha: f64, n: usize, seed: u64, k: usize, level: f64) -> Result<String, JsValue> {
    export(estimate_value(alpha, n, seed, k, level))
}

/// The tail-index path and the Reiss–Thomas objective over the default range.
#[wasm_bindgen]
pub fn k_path(alpha: f64, n: usize, seed: u64, theta: f64) -> Result<String, JsValue> {
    export(k_path_value(alpha, n, seed, theta))
}

/// True, Weissman and bias-reduced quantiles on a log grid of tail
/// probabilities below `k/n`.
#[wasm_bindgen]
pub fn quantile_curves(alpha: f64, n: usize, seed: u64, k: usize, points: usize) -> Result<String, JsValue> {
    export(quantile_curves_value(alpha, n, seed, k, points))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_reports_all_parts() {
        let v = estimate_value(1.5, 1000, 3, 200, 0.95).unwrap();
        assert_eq!(v["k"], 200);
        assert!(v["peng"]["mean_hat"].as_f64().unwrap() > 1.0);
        assert!(v["hill_alpha"].as_f64().unwrap() > 1.0);
        assert!(v["true_mean"].as_f64().is_some());
    }

    #[test]
    fn k_path_lengths() {
        let v = k_path_value(1.5, 200, 4, 0.3).unwrap();
        assert_eq!(v["alpha_path"].as_array().unwrap().len(), 100);
        assert_eq!(v["objective"].as_array().unwrap().len(), 91);
    }

    #[test]
    fn quantile_curves_are_decreasing_in_s() {
        let v = quantile_curves_value(1.5, 1000, 5, 150, 20).unwrap();
        let rows = v["curves"].as_array().unwrap();
        assert_eq!(rows.len(), 20);
        let w: Vec<f64> = rows.iter().map(|r| r["weissman"].as_f64().unwrap()).collect();
        assert!(w.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn small_samples_are_rejected() {
        assert!(estimate_value(1.5, 10, 1, 0, 0.95).is_err());
    }
}
