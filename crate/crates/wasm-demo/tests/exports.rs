use psh_wasm_demo::{bundled_case_json, compare_json, model_size_json};
use serde_json::Value;

#[test]
fn bundled_comparison_has_chart_series() {
    let out: Value =
        serde_json::from_str(&compare_json(&bundled_case_json(), 1e-6).unwrap()).unwrap();
    for model in ["legacy", "proposed"] {
        let run = &out[model];
        assert_eq!(run["net_load"].as_array().unwrap().len(), 24);
        assert_eq!(run["psh_net"].as_array().unwrap().len(), 24);
        assert_eq!(run["lmp"].as_array().unwrap().len(), 24);
    }
    let legacy = out["legacy"]["thermal_cost"].as_f64().unwrap();
    let proposed = out["proposed"]["thermal_cost"].as_f64().unwrap();
    assert!(proposed < legacy);
    assert!(
        out["benefit"]["objective_improvement_pct"]
            .as_f64()
            .unwrap()
            > 0.0
    );
}

#[test]
fn size_report_agrees_with_counts() {
    let out: Value = serde_json::from_str(&model_size_json(&bundled_case_json()).unwrap()).unwrap();
    assert_eq!(out["measured"]["added_binaries"], 0);
    assert_eq!(
        out["measured"]["added_variables"]["e"],
        out["expected"]["soc_variables"]
    );
}

#[test]
fn bad_input_is_an_error_string() {
    let err = compare_json("{\"version\": 1", 1e-6).unwrap_err();
    assert!(!err.is_empty());
    assert!(model_size_json("[]").is_err());
}
