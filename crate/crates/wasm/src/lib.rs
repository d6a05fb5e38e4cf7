//! Browser bindings. Each export returns a JSON string; the plain functions
//! underneath are what the native tests call.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use czhardy::geometry::CzSetRecord;
use czhardy::maximal::cz_covering;
use czhardy::operators::{extreme_eigenvalues_formula, laplacian, Multiplier, Spectrum};
use czhardy::random::random_function;
use czhardy::scalar::{format_rational, parse_rational, rational_to_f64};
use czhardy::{Exact, Exponent, Tree, TreeConfig, TreeFunction, VertexId, WeightedMeasure};

/// Keeps dense eigensolves interactive in a browser tab.
pub const MAX_DIM: usize = 1200;

fn measure(q: u32, depth: u32) -> Result<WeightedMeasure, String> {
    let cfg = TreeConfig::new(q, depth);
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(WeightedMeasure::new(Tree::new(cfg).map_err(|e| e.to_string())?))
}

fn small_measure(q: u32, depth: u32) -> Result<WeightedMeasure, String> {
    let m = measure(q, depth)?;
    if m.tree().len() > MAX_DIM {
        return Err(format!("{} vertices is too many for the demo (limit {MAX_DIM})", m.tree().len()));
    }
    Ok(m)
}

/// Parent index and level per vertex, in breadth-first order.
pub fn layout(tree: &Tree) -> Value {
    let parents: Vec<Option<u32>> = tree.vertices().map(|v| tree.parent(v).map(|p| p.0)).collect();
    let levels: Vec<i64> = tree.vertices().map(|v| tree.level(v)).collect();
    json!({"q": tree.q(), "parents": parents, "levels": levels})
}

pub fn covering_report(q: u32, depth: u32, p: u32, lambda: &str, seed: u64) -> Result<Value, String> {
    let m = small_measure(q, depth)?;
    let t = m.tree();
    let lambda: Exact = parse_rational(lambda).ok_or_else(|| format!("bad threshold {lambda:?}"))?;
    let p = Exponent::new(p as f64).map_err(|e| e.to_string())?;
    let f: TreeFunction<Exact> = random_function(t, &mut ChaCha8Rng::seed_from_u64(seed));
    let c = cz_covering(&f, &m, p, &lambda, None).map_err(|e| e.to_string())?;
    let members = |vs: Vec<VertexId>| vs.into_iter().map(|v| v.0).collect::<Vec<_>>();
    let mut sets = Vec::new();
    for (r, e) in c.selected.iter().zip(&c.envelopes) {
        let inside = r.vertices(t).map_err(|e| e.to_string())?;
        sets.push(json!({
            "record": CzSetRecord::from_trapezoid(r, t),
            "trapezoid": members(inside),
            "envelope": members(e.vertices_clipped(t)),
        }));
    }
    Ok(json!({
        "tree": layout(t),
        "values": f.values.iter().map(rational_to_f64).collect::<Vec<_>>(),
        "level_set": members(c.level_set.clone()),
        "sets": sets,
        "lp_pow": format_rational(&c.lp_pow),
        "sum_mu_selected": format_rational(&c.sum_mu_selected),
        "mu_union": format_rational(&c.mu_union),
        "certificate": c.certificate,
    }))
}

pub fn spectrum_report(q: u32, depth: u32) -> Result<Value, String> {
    let m = small_measure(q, depth)?;
    let s = Spectrum::new(&laplacian(&m)).map_err(|e| e.to_string())?;
    let (lo, hi) = extreme_eigenvalues_formula(depth);
    Ok(json!({
        "dim": s.values.len(),
        "values": s.values,
        "margin": s.margin(),
        "formula_min": lo,
        "formula_max": hi,
    }))
}

/// Row `x` of `e^{−t𝓛}`: the kernel `K(x,·)` and the mass `K(x,·)μ(·)`.
pub fn heat_row_report(q: u32, depth: u32, t: f64, x: u32) -> Result<Value, String> {
    let m = small_measure(q, depth)?;
    let tree = m.tree();
    if x as usize >= tree.len() {
        return Err(format!("vertex {x} out of range"));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err("t must be a nonnegative number".into());
    }
    let s = Spectrum::new(&laplacian(&m)).map_err(|e| e.to_string())?;
    let h = s.multiplier(&Multiplier::Heat { t }).map_err(|e| e.to_string())?;
    let x = x as usize;
    let kernel: Vec<f64> = (0..h.dim()).map(|y| h.kernel(x, y)).collect();
    let mass: Vec<f64> = kernel.iter().zip(h.weights()).map(|(k, w)| k * w).collect();
    Ok(json!({
        "tree": layout(tree),
        "vertex": x,
        "label": tree.label(VertexId(x as u32)),
        "kernel": kernel,
        "mass": mass,
        "total_mass": mass.iter().sum::<f64>(),
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn covering(q: u32, depth: u32, p: u32, lambda: &str, seed: u32) -> Result<String, JsValue> {
    to_js(covering_report(q, depth, p, lambda, seed as u64))
}

#[wasm_bindgen]
pub fn spectrum(q: u32, depth: u32) -> Result<String, JsValue> {
    to_js(spectrum_report(q, depth))
}

#[wasm_bindgen]
pub fn heat_row(q: u32, depth: u32, t: f64, vertex: u32) -> Result<String, JsValue> {
    to_js(heat_row_report(q, depth, t, vertex))
}
