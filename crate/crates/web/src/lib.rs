//! Browser bindings for the l0-RLS demo page in `www/`.
//!
//! Every exported function returns a JSON string; the pure `*_value` functions
//! behind them are what the native tests exercise.

use l0rls::sim::{run_ensemble, system_rng, ExperimentConfig, SystemSpec};
use l0rls::{gen_system, g_scalar, l0_norm_approx, predict, Algorithm, FilterParams, SignalModel};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Scenario shared by the theory and simulation panels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub large: usize,
    pub small: usize,
    pub zero: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub sigma_x2: f64,
    pub sigma_v2: f64,
    pub seed: u64,
}

impl Scenario {
    fn experiment(&self, iterations: usize, runs: usize) -> Result<ExperimentConfig, String> {
        let n_taps = self.large + self.small + self.zero;
        let params = FilterParams::with_default_init(n_taps, self.lambda, self.gamma, self.alpha, self.sigma_x2)
            .map_err(|e| e.to_string())?;
        let model = SignalModel::new(self.sigma_x2, self.sigma_v2).map_err(|e| e.to_string())?;
        let spec = SystemSpec::Generated {
            large: self.large,
            small: self.small,
            zero: self.zero,
            ranges: Default::default(),
        };
        let system = gen_system(&spec, self.alpha, &mut system_rng(self.seed)).map_err(|e| e.to_string())?;
        let config = ExperimentConfig {
            params,
            model,
            system,
            iterations,
            runs,
            steady_window: 0.2,
            seed: self.seed,
            algorithm: Algorithm::L0rls,
        };
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }
}

/// Samples of `g(t)` and of the per-tap l0 surrogate `1 − e^{−α|t|}` on `[-t_max, t_max]`.
pub fn attraction_value(alpha: f64, t_max: f64, points: usize) -> Result<Value, String> {
    if !(t_max > 0.0 && t_max.is_finite()) || points < 2 {
        return Err("t_max must be positive and points at least 2".into());
    }
    let mut t = Vec::with_capacity(points);
    let mut g = Vec::with_capacity(points);
    let mut l0 = Vec::with_capacity(points);
    for i in 0..points {
        let ti = t_max * (2 * i as i64 - (points as i64 - 1)) as f64 / (points - 1) as f64;
        g.push(g_scalar(ti, alpha).map_err(|e| e.to_string())?);
        l0.push(l0_norm_approx(&[ti], alpha).map_err(|e| e.to_string())?);
        t.push(ti);
    }
    Ok(json!({ "alpha": alpha, "t": t, "g": g, "l0": l0 }))
}

/// Steady-state prediction for the scenario, including the generated true system.
pub fn theory_value(s: &Scenario) -> Result<Value, String> {
    let config = s.experiment(1, 1)?;
    let prediction = predict(&config.system.w0, &config.params, &config.model).map_err(|e| e.to_string())?;
    Ok(json!({ "w0": config.system.w0, "prediction": prediction }))
}

/// Ensemble learning curves of RLS and l0-RLS on identical signals, downsampled to `points`.
pub fn learning_curves_value(s: &Scenario, iterations: usize, runs: usize, points: usize) -> Result<Value, String> {
    let config = s.experiment(iterations, runs)?;
    let l0 = run_ensemble(&config).map_err(|e| e.to_string())?;
    let rls = run_ensemble(&config.with_algorithm(Algorithm::Rls)).map_err(|e| e.to_string())?;
    let prediction = predict(&config.system.w0, &config.params, &config.model).map_err(|e| e.to_string())?;
    let theory_rls = prediction.n_taps as f64 * (1.0 - s.lambda) * s.sigma_v2 / ((1.0 + s.lambda) * s.sigma_x2);

    let stride = iterations.div_ceil(points.max(1)).max(1);
    let iters: Vec<usize> = (0..iterations).step_by(stride).collect();
    let pick = |curve: &[f64]| iters.iter().map(|&n| curve[n]).collect::<Vec<_>>();
    Ok(json!({
        "iter": iters.iter().map(|n| n + 1).collect::<Vec<_>>(),
        "rls": pick(&rls.msd_curve),
        "l0rls": pick(&l0.msd_curve),
        "steady_rls": rls.steady_msd,
        "steady_l0rls": l0.steady_msd,
        "theory_rls": theory_rls,
        "theory_l0rls": prediction.d_total(),
    }))
}

fn to_js(v: Result<Value, String>) -> Result<String, JsValue> {
    v.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn attraction_curve(alpha: f64, t_max: f64, points: usize) -> Result<String, JsValue> {
    to_js(attraction_value(alpha, t_max, points))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn theory(
    large: usize,
    small: usize,
    zero: usize,
    lambda: f64,
    gamma: f64,
    alpha: f64,
    sigma_x2: f64,
    sigma_v2: f64,
    seed: u64,
) -> Result<String, JsValue> {
    let s = Scenario { large, small, zero, lambda, gamma, alpha, sigma_x2, sigma_v2, seed };
    to_js(theory_value(&s))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn learning_curves(
    large: usize,
    small: usize,
    zero: usize,
    lambda: f64,
    gamma: f64,
    alpha: f64,
    sigma_x2: f64,
    sigma_v2: f64,
    seed: u64,
    iterations: usize,
    runs: usize,
) -> Result<String, JsValue> {
    let s = Scenario { large, small, zero, lambda, gamma, alpha, sigma_x2, sigma_v2, seed };
    to_js(learning_curves_value(&s, iterations, runs, 400))
}
