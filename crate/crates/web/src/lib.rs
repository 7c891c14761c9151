//! wasm-bindgen exports for `www/index.html`. Every call takes the page's
//! parameter object as JSON and returns JSON.

pub mod demo;

use wasm_bindgen::prelude::*;

use demo::DemoParams;

fn run<T: serde::Serialize>(params: &str, op: impl FnOnce(&DemoParams) -> Result<T, String>) -> Result<String, JsError> {
    let p = DemoParams::from_json(params).map_err(|e| JsError::new(&e))?;
    let out = op(&p).map_err(|e| JsError::new(&e))?;
    demo::to_json(&out).map_err(|e| JsError::new(&e))
}

/// Simulate, verify and return profiles, the range of `u` and the measured envelope.
#[wasm_bindgen]
pub fn simulate(params: &str) -> Result<String, JsError> {
    run(params, demo::simulate)
}

/// Motility audit plus sampled curves on `[0, s_max]`.
#[wasm_bindgen]
pub fn motility(params: &str, s_max: f64) -> Result<String, JsError> {
    run(params, |p| demo::motility(p, s_max))
}

/// Closed-bound envelope with decay bounds.
#[wasm_bindgen]
pub fn closed_envelope(params: &str) -> Result<String, JsError> {
    run(params, demo::closed_envelope)
}
