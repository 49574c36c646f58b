//! Browser bindings for the demo page in `www/`.
//!
//! Every export returns a flat `Float64Array` sampled on `samples` evenly spaced
//! times in `[0, tmax]`. The plain `*_curve` functions hold the numerics and are
//! what the native tests call.

use harmonet::bqpred::{self, Circuit, InstanceDynamics};
use harmonet::gluedtrees;
use harmonet::linalg::SymEigen;
use harmonet::{Error, Result};
use wasm_bindgen::prelude::*;

/// Largest curve the page may ask for.
pub const MAX_SAMPLES: usize = 20_000;

fn times(tmax: f64, samples: usize) -> Result<Vec<f64>> {
    if !(tmax > 0.0 && tmax.is_finite()) {
        return Err(Error::InvalidInput(format!("tmax {tmax} must be positive")));
    }
    if !(2..=MAX_SAMPLES).contains(&samples) {
        return Err(Error::InvalidInput(format!("samples must lie in 2..={MAX_SAMPLES}")));
    }
    let step = tmax / (samples - 1) as f64;
    Ok((0..samples).map(|i| i as f64 * step).collect())
}

/// Exit-root kinetic energy share of a depth-`n` glued-trees network, via the column chain.
pub fn exit_curve(n: usize, tmax: f64, samples: usize) -> Result<Vec<f64>> {
    let chain = gluedtrees::reduce_to_chain(n)?;
    Ok(times(tmax, samples)?.into_iter().map(|t| chain.exit_kinetic(t)).collect())
}

/// `|<L+1| e^{i sqrt(M) t} |1>|^2` for a tridiagonal chain matrix `M`.
fn end_to_end(m: &SymEigen, t: f64) -> f64 {
    let last = m.dim() - 1;
    let (re, im) = (0..m.dim()).fold((0.0, 0.0), |(re, im), k| {
        let w = m.vectors[(last, k)] * m.vectors[(0, k)];
        let phase = m.values[k].max(0.0).sqrt() * t;
        (re + w * phase.cos(), im + w * phase.sin())
    });
    re * re + im * im
}

/// Clock transfer for `gates` gates: the uniform chain's `alpha_{L+1}(t)^2` in the first
/// `samples` entries, the engineered chain's end-to-end probability in the rest.
pub fn clock_curves(gates: usize, tmax: f64, samples: usize) -> Result<Vec<f64>> {
    if !(1..=bqpred::MAX_GATES * 16).contains(&gates) {
        return Err(Error::InvalidInput(format!("gate count {gates} out of range")));
    }
    let ts = times(tmax, samples)?;
    let perfect = SymEigen::new(&bqpred::perfect_chain_matrix(gates));
    let uniform = ts.iter().map(|&t| bqpred::chain_alpha(gates, t).powi(2));
    let engineered = ts.iter().map(|&t| end_to_end(&perfect, t));
    Ok(uniform.chain(engineered).collect())
}

/// Output oscillator energy share of a compiled circuit given as JSON.
pub fn circuit_curve(circuit_json: &str, tmax: f64, samples: usize) -> Result<Vec<f64>> {
    let circuit = Circuit::from_json(circuit_json)?;
    let inst = bqpred::compile(&circuit)?;
    let dynamics = InstanceDynamics::new(&inst.a, &inst.initial_velocity)?;
    let out = inst.output_index;
    Ok(times(tmax, samples)?
        .into_iter()
        .map(|t| 0.5 * dynamics.velocities(t)[out].powi(2))
        .collect())
}

fn js(r: Result<Vec<f64>>) -> std::result::Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = exitCurve)]
pub fn exit_curve_js(n: usize, tmax: f64, samples: usize) -> std::result::Result<Vec<f64>, JsError> {
    js(exit_curve(n, tmax, samples))
}

#[wasm_bindgen(js_name = clockCurves)]
pub fn clock_curves_js(gates: usize, tmax: f64, samples: usize) -> std::result::Result<Vec<f64>, JsError> {
    js(clock_curves(gates, tmax, samples))
}

#[wasm_bindgen(js_name = circuitCurve)]
pub fn circuit_curve_js(circuit_json: &str, tmax: f64, samples: usize) -> std::result::Result<Vec<f64>, JsError> {
    js(circuit_curve(circuit_json, tmax, samples))
}
