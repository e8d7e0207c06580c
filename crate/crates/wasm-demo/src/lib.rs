//! Browser bindings: compare the two market models on a case and report
//! the size of the reservoir extension. Every export takes and returns JSON
//! strings so the page needs no generated type glue.

use psh_core::analysis::{
    compactness_formulas, compactness_report, compare_models, RunOptions, SolvedRun,
};
use psh_core::formulation::{build_baseline, build_proposed, ObjectiveMode};
use psh_core::io::{case_to_json, parse_case, RunRecord};
use psh_core::solver::SolverHandle;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const BUNDLED: &str = include_str!("../../core/cases/two_unit.json");

/// Keeps a browser tab responsive on hard days.
pub const DEMO_NODE_LIMIT: usize = 20_000;

pub fn bundled_case_json() -> String {
    let case = parse_case(BUNDLED).expect("bundled case is valid");
    case_to_json(case.case())
}

fn run_json(run: &SolvedRun) -> Value {
    let record = RunRecord::from(run);
    json!({
        "model": record.model_tag,
        "status": run.solve.status,
        "gap": run.solve.gap,
        "nodes": run.solve.nodes_explored,
        "thermal_cost": run.thermal_cost,
        "net_load": record.net_load,
        "psh_net": record.psh_net(),
        "soc": record.total_soc(),
        "lmp": run.prices.lmp,
    })
}

pub fn compare_json(case_json: &str, rel_gap: f64) -> Result<String, String> {
    let case = parse_case(case_json).map_err(|e| e.to_string())?;
    let options = RunOptions {
        rel_gap,
        node_limit: DEMO_NODE_LIMIT,
        solver: SolverHandle::builtin(),
        objective: ObjectiveMode::ThermalOnly,
    };
    let c = compare_models(&case, &options).map_err(|e| e.to_string())?;
    Ok(json!({
        "legacy": run_json(&c.legacy),
        "proposed": run_json(&c.proposed),
        "benefit": c.report,
    })
    .to_string())
}

pub fn model_size_json(case_json: &str) -> Result<String, String> {
    let case = parse_case(case_json).map_err(|e| e.to_string())?;
    let (proposed, _) =
        build_proposed(&case, ObjectiveMode::ThermalOnly).map_err(|e| e.to_string())?;
    let (baseline, _) = build_baseline(&case, ObjectiveMode::ThermalOnly);
    Ok(json!({
        "measured": compactness_report(&proposed, &baseline),
        "expected": compactness_formulas(&case),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn bundled_case() -> String {
    bundled_case_json()
}

#[wasm_bindgen]
pub fn compare(case_json: &str, rel_gap: f64) -> Result<String, JsValue> {
    compare_json(case_json, rel_gap).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn model_size(case_json: &str) -> Result<String, JsValue> {
    model_size_json(case_json).map_err(|e| JsValue::from_str(&e))
}
