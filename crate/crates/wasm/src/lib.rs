//! Browser bindings. Each export takes plain numbers and returns a JSON
//! string for the page to draw.

use nalgebra::DVector;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use scca_core::cca::{fit_pair, FitConfig};
use scca_core::covariance::center_scale;
use scca_core::error::Result;
use scca_core::pattern::{GammaScale, Penalty};
use scca_core::simulate::{
    evaluate, gen_null, gen_rank_one, stability_path, MetricReport, RankOneSpec, StabilityPoint,
};

fn relative_config(gamma1: f64, gamma2: f64) -> FitConfig {
    let mut cfg = FitConfig::default();
    cfg.pair.gamma_scale = GammaScale::Relative;
    cfg.pair.gamma1 = gamma1;
    cfg.pair.gamma2 = gamma2;
    cfg
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.as_slice().to_vec()
}

#[derive(Serialize)]
pub struct PlantedFit {
    pub truths: Vec<Vec<f64>>,
    pub estimates: Vec<Vec<f64>>,
    pub metrics: MetricReport,
    pub iterations: usize,
}

/// Draws the planted two-view model and fits it with relative thresholds.
pub fn planted_fit(sigma: f64, gamma1: f64, gamma2: f64, seed: u64) -> Result<PlantedFit> {
    let data = gen_rank_one(&RankOneSpec::two_view(sigma, seed))?;
    let views = data.centered();
    let sol = fit_pair(&views[0], &views[1], &relative_config(gamma1, gamma2))?;
    Ok(PlantedFit {
        metrics: evaluate(&sol, &data.truths)?,
        truths: data.truths.iter().map(to_vec).collect(),
        estimates: sol.directions.iter().map(|d| to_vec(&d[0])).collect(),
        iterations: sol.iterations[0],
    })
}

/// Sparse-vs-dense comparison on independent Gaussian views as the view-2
/// threshold grows.
pub fn null_path(n: usize, p1: usize, p2: usize, seed: u64, steps: usize) -> Result<Vec<StabilityPoint>> {
    let (a, b) = gen_null(n, p1, p2, seed)?;
    let (a, b) = (center_scale(&a, false).view, center_scale(&b, false).view);
    let steps = steps.max(2);
    let gammas: Vec<f64> = (0..steps).map(|k| 0.95 * k as f64 / (steps - 1) as f64).collect();
    stability_path(&a, &b, &gammas, &relative_config(0.0, 0.0), Some(1))
}

#[derive(Serialize)]
pub struct Trace {
    /// One objective sequence per stage-one pass.
    pub passes: Vec<Vec<f64>>,
    pub cardinalities: Vec<usize>,
}

/// Stage-one objective sequences for one fit on independent Gaussian views.
pub fn objective_trace(n: usize, p: usize, gamma: f64, l0: bool, seed: u64) -> Result<Trace> {
    let (a, b) = gen_null(n, p, p, seed)?;
    let views = [center_scale(&a, false).view, center_scale(&b, false).view];
    let mut cfg = relative_config(gamma, gamma);
    cfg.pair.penalty = if l0 { Penalty::L0 } else { Penalty::L1 };
    cfg.pair.conv = cfg.pair.conv.tracked();
    let sol = fit_pair(&views[0], &views[1], &cfg)?;
    Ok(Trace {
        passes: sol.objective_traces.clone(),
        cardinalities: sol.patterns.iter().map(|p| p[0].active_count()).collect(),
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = plantedFit)]
pub fn planted_fit_js(sigma: f64, gamma1: f64, gamma2: f64, seed: u32) -> std::result::Result<String, JsError> {
    to_js(planted_fit(sigma, gamma1, gamma2, seed as u64))
}

#[wasm_bindgen(js_name = nullPath)]
pub fn null_path_js(n: usize, p1: usize, p2: usize, seed: u32, steps: usize) -> std::result::Result<String, JsError> {
    to_js(null_path(n, p1, p2, seed as u64, steps))
}

#[wasm_bindgen(js_name = objectiveTrace)]
pub fn objective_trace_js(n: usize, p: usize, gamma: f64, l0: bool, seed: u32) -> std::result::Result<String, JsError> {
    to_js(objective_trace(n, p, gamma, l0, seed as u64))
}
