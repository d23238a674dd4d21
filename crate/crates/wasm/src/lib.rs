//! Bindings behind the static demo page in `www/`.
//!
//! Every entry point has a plain Rust twin returning `Result<_, String>` so
//! the logic is testable off the browser.

use resmin::adapt::{observed_rates, run_study, AdaptRecord, RateAxis, RateQuantity};
use resmin::config::{ProblemSelector, RunConfig};
use resmin::problem::{catalog_entries, Expr};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Studies in the page stop here unless the config asks for less.
pub const BROWSER_MAX_DOFS: usize = 60_000;

#[derive(Debug, Serialize)]
struct ProblemEntry {
    name: &'static str,
    description: &'static str,
}

/// One level as drawn by the page.
#[derive(Debug, Serialize)]
pub struct Snapshot {
    pub level: usize,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// `u_h` at the vertices.
    pub u: Vec<f64>,
    pub indicators: Vec<f64>,
    pub marked: Vec<usize>,
    pub record: AdaptRecord,
}

#[derive(Debug, Serialize)]
pub struct StudyOutput {
    pub problem: String,
    pub levels: Vec<Snapshot>,
    /// Observed rates against total dofs, one entry fewer than levels.
    pub rate_estimator: Vec<Option<f64>>,
    pub rate_err_vh: Vec<Option<f64>>,
}

pub fn problems_json() -> String {
    let list: Vec<_> = catalog_entries().iter().map(|&(name, description)| ProblemEntry { name, description }).collect();
    serde_json::to_string(&list).expect("plain data serializes")
}

/// Runs the study described by a config document and keeps every level.
pub fn study(config_json: &str) -> Result<StudyOutput, String> {
    let mut cfg = RunConfig::from_json(config_json, None).map_err(|e| e.to_string())?;
    if matches!(cfg.problem, ProblemSelector::File { .. }) {
        return Err("problem: files are not available in the browser".into());
    }
    cfg.max_dofs = Some(cfg.max_dofs.map_or(BROWSER_MAX_DOFS, |m| m.min(BROWSER_MAX_DOFS)));
    cfg.validate().map_err(|e| e.to_string())?;
    let problem = cfg.problem().map_err(|e| e.to_string())?;
    let mut levels = Vec::new();
    let records = run_study(&problem, &cfg.study_options(), |v| {
        levels.push(Snapshot {
            level: v.level,
            vertices: v.mesh.vertices().to_vec(),
            triangles: v.mesh.elements().to_vec(),
            u: v.cg.vertex_values(v.mesh, &v.solution.u).to_vec(),
            indicators: v.report.indicators.clone(),
            marked: v.marked.to_vec(),
            record: v.record.clone(),
        });
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    Ok(StudyOutput {
        problem: problem.name.clone(),
        levels,
        rate_estimator: observed_rates(&records, RateAxis::Dofs, RateQuantity::Estimator),
        rate_err_vh: observed_rates(&records, RateAxis::Dofs, RateQuantity::ErrVh),
    })
}

/// Samples an expression in `x`, `y` on an `nx` by `ny` grid over
/// `[x0, x1] x [y0, y1]`, row by row from `y0`.
pub fn sample(expr: &str, bbox: [f64; 4], nx: usize, ny: usize) -> Result<Vec<f64>, String> {
    if nx < 2 || ny < 2 {
        return Err("the grid needs at least two points per direction".into());
    }
    let e = Expr::parse(expr).map_err(|e| e.to_string())?;
    let [x0, x1, y0, y1] = bbox;
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let y = y0 + (y1 - y0) * j as f64 / (ny - 1) as f64;
        for i in 0..nx {
            let x = x0 + (x1 - x0) * i as f64 / (nx - 1) as f64;
            out.push(e.try_eval(x, y).map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

#[wasm_bindgen(js_name = listProblems)]
pub fn list_problems() -> String {
    problems_json()
}

/// JSON in, JSON out.
#[wasm_bindgen(js_name = runStudy)]
pub fn run_study_js(config_json: &str) -> Result<String, JsValue> {
    let out = study(config_json).map_err(|e| JsValue::from_str(&e))?;
    serde_json::to_string(&out).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = sampleExpression)]
pub fn sample_js(expr: &str, x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<Vec<f64>, JsValue> {
    sample(expr, [x0, x1, y0, y1], nx, ny).map_err(|e| JsValue::from_str(&e))
}
