//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string.

use alc_core::analysis::{self, DepthVariant, ModelParams, Size};
use alc_core::montecarlo::{self, ExperimentConfig};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn size(poisson: bool, n: f64) -> Size {
    if poisson {
        Size::Poisson { lambda: n }
    } else {
        Size::Fixed { n: n.round().max(0.0) as u64 }
    }
}

pub fn fill_curve_json(p: f64, n: f64, poisson: bool, k_max: u32) -> Result<String, String> {
    let params = ModelParams::new(p, 0.5, size(poisson, n)).map_err(|e| e.to_string())?;
    let curve: Vec<f64> = (0..=k_max as usize)
        .map(|k| analysis::expected_fill_fraction(&params, k))
        .collect();
    Ok(json!({ "k": (0..=k_max).collect::<Vec<_>>(), "value": curve }).to_string())
}

pub fn fillup_histogram_json(
    p: f64,
    alpha: f64,
    n: f64,
    poisson: bool,
    trials: u32,
    seed: u64,
) -> Result<String, String> {
    if trials > 5000 || n > 1e6 {
        return Err("keep trials <= 5000 and n <= 1e6 in the browser".into());
    }
    let params = ModelParams::new(p, alpha, size(poisson, n)).map_err(|e| e.to_string())?;
    let hist = montecarlo::simulate_fillup(&ExperimentConfig::new(params, trials as usize, seed))
        .map_err(|e| e.to_string())?;
    Ok(json!({
        "counts": hist.counts,
        "undefined": hist.undefined,
        "mode": hist.mode(),
        "mean": hist.mean(),
        "top_two_consecutive_mass": hist.top_two_consecutive_mass(),
        "closed_form": analysis::predict_level_closed_form(n, alpha, p).ok(),
        "calibrated": analysis::predict_level_calibrated(&params).ok(),
    })
    .to_string())
}

pub fn predict_json(p: f64, alpha: f64, n: f64) -> Result<String, String> {
    let params = ModelParams::new(p, alpha, size(false, n)).map_err(|e| e.to_string())?;
    Ok(json!({
        "closed_form": analysis::predict_level_closed_form(n, alpha, p).ok(),
        "calibrated": analysis::predict_level_calibrated(&params).ok(),
        "full_fillup": analysis::predict_full_fillup(n, p).ok(),
        "depth_alpha_lc": analysis::depth_constant(p, DepthVariant::AlphaLc).ok(),
        "depth_full_lc": analysis::depth_constant(p, DepthVariant::FullLc).ok(),
    })
    .to_string())
}

/// Expected fill fraction for levels `0..=k_max`.
#[wasm_bindgen]
pub fn fill_curve(p: f64, n: f64, poisson: bool, k_max: u32) -> Result<String, JsError> {
    fill_curve_json(p, n, poisson, k_max).map_err(|e| JsError::new(&e))
}

/// Simulated histogram of the α-fillup level next to both predictors.
#[wasm_bindgen]
pub fn fillup_histogram(
    p: f64,
    alpha: f64,
    n: f64,
    poisson: bool,
    trials: u32,
    seed: u64,
) -> Result<String, JsError> {
    fillup_histogram_json(p, alpha, n, poisson, trials, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn predict(p: f64, alpha: f64, n: f64) -> Result<String, JsError> {
    predict_json(p, alpha, n).map_err(|e| JsError::new(&e))
}
