//! wasm-bindgen entry points for the browser demo in `www/`.
//!
//! Every export takes a preset name plus newline-separated `key=value`
//! overrides and returns a JSON string.

use kfcs_core::{bounds, harness, ExperimentConfig};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn load(preset: &str, overrides: &str) -> Result<ExperimentConfig, String> {
    let list: Vec<String> = overrides
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect();
    ExperimentConfig::load(preset, &list).map_err(|e| e.to_string())
}

/// MSE curves and summary rows of a Monte Carlo run.
pub fn simulate_json(preset: &str, overrides: &str) -> Result<String, String> {
    let cfg = load(preset, overrides)?;
    let trace = harness::run_experiment(&cfg).map_err(|e| e.to_string())?;
    let curves: Vec<Value> = trace
        .algorithms
        .iter()
        .map(|a| json!({ "algorithm": a.algorithm.name(), "mse": a.mse(), "support_err": a.support_err_mean() }))
        .collect();
    let out = json!({
        "horizon": trace.horizon,
        "n_trials": trace.n_trials,
        "completed": trace.completed.len(),
        "curves": curves,
        "summary": harness::summarize(&trace),
    });
    Ok(out.to_string())
}

/// Enumerated delta/theta constants and assumption checks.
pub fn audit_json(preset: &str, overrides: &str) -> Result<String, String> {
    let cfg = load(preset, overrides)?;
    let report = cfg.incoherence_report().map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

/// `B1`, `tau_eps` and the `B_CSLSE(S)` table. Infinite values come out as `null`.
pub fn bounds_json(preset: &str, overrides: &str) -> Result<String, String> {
    let cfg = load(preset, overrides)?;
    let rb = cfg.bound_inputs().map_err(|e| e.to_string())?;
    let inp = &rb.inputs;
    let b1 = bounds::b1(inp);
    let tau = bounds::tau_epsilon(rb.eps, inp, cfg.sigma_sys_sq).ok();
    let table: Vec<Value> = (1..=rb.s_inf)
        .map(|s| bounds::b_cslse(s, inp).map(|b| json!({ "s": s, "b_cslse": b })))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let best = bounds::min_over_s_bound(inp, 1..=rb.s_inf).map_err(|e| e.to_string())?;
    let out = json!({
        "b1": b1,
        "eps": rb.eps,
        "tau_eps": tau,
        "c1": inp.c1,
        "lambda_m": inp.lambda_m,
        "delta_t": inp.delta_t,
        "theta_t_delta": inp.theta_t_delta,
        "s_star": best.0,
        "min_b_cslse": best.1,
        "table": table,
    });
    Ok(out.to_string())
}

#[wasm_bindgen]
pub fn simulate(preset: &str, overrides: &str) -> Result<String, JsError> {
    simulate_json(preset, overrides).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn audit(preset: &str, overrides: &str) -> Result<String, JsError> {
    audit_json(preset, overrides).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bounds_table(preset: &str, overrides: &str) -> Result<String, JsError> {
    bounds_json(preset, overrides).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "m=16\nn=8\nmatrix=\"hadamard_pair\"\nsigma_obs_sq=1e-4\nschedule=\"custom\"\n\
                         custom_schedule=[{time=5, indices=[3]}]\nhorizon=12\nn_trials=3\nbounds.t_size=2";

    #[test]
    fn simulate_returns_curves() {
        let v: Value = serde_json::from_str(&simulate_json("experiment1", SMALL).unwrap()).unwrap();
        assert_eq!(v["horizon"], 12);
        assert_eq!(v["curves"].as_array().unwrap().len(), 5);
        assert_eq!(v["curves"][0]["mse"].as_array().unwrap().len(), 12);
    }

    #[test]
    fn audit_and_bounds() {
        let v: Value = serde_json::from_str(&audit_json("experiment1", SMALL).unwrap()).unwrap();
        assert_eq!(v["budget_s_max"], 1);
        let b: Value = serde_json::from_str(&bounds_json("experiment1", SMALL).unwrap()).unwrap();
        assert!((b["b1"].as_f64().unwrap() - 0.0512).abs() < 1e-12);
        assert_eq!(b["tau_eps"], 13);
    }

    #[test]
    fn errors_are_messages() {
        assert!(simulate_json("experiment9", "").unwrap_err().contains("experiment9"));
        assert!(audit_json("experiment1", "").is_err());
    }
}
