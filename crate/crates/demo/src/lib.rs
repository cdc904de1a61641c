//! Browser bindings for three small experiments. Each entry point returns a
//! JSON string so the page needs no generated type glue.

use declat::hodge::MaterialMap;
use declat::maxwell::{
    build_operators, deterministic_vector, relative_drift_slope, simulate, stable_timestep, DiscreteCodifferential,
    FieldState, InverseMode,
};
use declat::mesh::{classify_boundary, generate, incidence};
use declat::pic::conservation_study;
use declat::pml::{reflection_sweep, Waveguide};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest box the page may request; keeps one call under a second.
pub const MAX_BOX: usize = 6;

/// Reflection of the waveguide PML at `omega = 2π` for each strength, at
/// the given thickness.
pub fn reflection_curve(strengths: &[f64], thickness: f64) -> declat::Result<String> {
    let omega = std::f64::consts::TAU;
    let profiles: Vec<(f64, f64)> = strengths.iter().map(|&w| (w, thickness)).collect();
    let rows = reflection_sweep(&Waveguide::default(), omega, &profiles)?;
    Ok(json!({ "omega": omega, "thickness": thickness, "rows": rows }).to_string())
}

/// Energy trace of a PEC box cavity started from a pseudo-random field.
pub fn energy_run(n: usize, steps: usize, cfl: f64, seed: u64) -> declat::Result<String> {
    let n = n.clamp(1, MAX_BOX);
    let complex = generate::box_mesh(n);
    let cls = classify_boundary(&complex)?;
    let ops = build_operators(&complex, &MaterialMap::vacuum(&complex), Some(&cls))?;
    let codiff = DiscreteCodifferential::new(&ops, InverseMode::Exact)?;
    let bound = stable_timestep(&ops, &codiff)?.dt_max;
    let dt = cfl * bound;
    let start = FieldState::initial(&ops, deterministic_vector(ops.n_edges(), seed), vec![0.0; ops.n_faces()], dt)?;
    let (trace, diverged) = match simulate(&ops, &codiff, start, steps, None) {
        Ok(run) => (run.trace, false),
        Err(declat::Error::Diverged { .. }) => (Vec::new(), true),
        Err(e) => return Err(e),
    };
    let energy: Vec<f64> = trace.iter().map(|r| r.h_total).collect();
    Ok(json!({
        "tets": complex.count(3),
        "dt": dt,
        "stability_bound": bound,
        "diverged": diverged,
        "drift_slope": if diverged { f64::NAN } else { relative_drift_slope(&trace) },
        "energy": energy,
    })
    .to_string())
}

/// Charge-conservation study of the current scatter on `box:4`.
pub fn deposit_study(paths: usize, seed: u64) -> declat::Result<String> {
    let complex = generate::box_mesh(4);
    let c0 = incidence(&complex, 0);
    let report = conservation_study(&complex, &c0, paths, seed, 1.0, 1.0)?;
    Ok(serde_json::to_string(&report).expect("report serializes"))
}

fn js(r: declat::Result<String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = reflectionCurve)]
pub fn reflection_curve_js(strengths: Vec<f64>, thickness: f64) -> Result<String, JsValue> {
    js(reflection_curve(&strengths, thickness))
}

#[wasm_bindgen(js_name = energyRun)]
pub fn energy_run_js(n: usize, steps: usize, cfl: f64, seed: u32) -> Result<String, JsValue> {
    js(energy_run(n, steps, cfl, u64::from(seed)))
}

#[wasm_bindgen(js_name = depositStudy)]
pub fn deposit_study_js(paths: usize, seed: u32) -> Result<String, JsValue> {
    js(deposit_study(paths, u64::from(seed)))
}
