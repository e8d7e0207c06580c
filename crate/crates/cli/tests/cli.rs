use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/cases/two_unit.json")
}

fn psh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psh"))
        .args(args)
        .env_remove("PSH_SOLVER_BACKEND")
        .output()
        .unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr_error(out: &Output) -> Value {
    assert!(!out.status.success());
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    v["error"].clone()
}

#[test]
fn solve_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("r.json");
    let out = psh(&[
        "solve",
        "--case",
        arg(&bundled()),
        "--model",
        "legacy",
        "--out",
        arg(&results),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["model"], "legacy");

    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&results).unwrap()).unwrap();
    assert_eq!(doc["runs"][0]["model_tag"], "legacy");
    assert_eq!(doc["runs"][0]["prices"].as_array().unwrap().len(), 24);

    let csv = dir.path().join("plot.csv");
    assert!(
        psh(&["plot-data", "--results", arg(&results), "--out", arg(&csv)])
            .status
            .success()
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 25);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",legacy")));
}

#[test]
fn compare_with_generated_and_listed_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("c.json");
    let out = psh(&[
        "compare",
        "--case",
        arg(&bundled()),
        "--scenarios",
        "2",
        "--seed",
        "7",
        "--out",
        arg(&results),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["objective_improvement_pct"].as_f64().unwrap() > 0.0);
    assert_eq!(summary["scenarios_not_worse"], 2);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&results).unwrap()).unwrap();
    assert_eq!(doc["runs"].as_array().unwrap().len(), 2);
    assert_eq!(doc["scenarios"].as_array().unwrap().len(), 2);

    let scenarios = dir.path().join("s.json");
    let case: Value = serde_json::from_str(&std::fs::read_to_string(bundled()).unwrap()).unwrap();
    let light: Vec<f64> = case["horizon"]["net_load"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| (9.0 * x.as_f64().unwrap()).round() / 10.0)
        .collect();
    let file = serde_json::json!({ "version": 1, "scenarios": [{ "label": "light-day", "net_load": light }] });
    std::fs::write(&scenarios, file.to_string()).unwrap();
    let out = psh(&[
        "compare",
        "--case",
        arg(&bundled()),
        "--scenarios",
        arg(&scenarios),
        "--out",
        arg(&results),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&results).unwrap()).unwrap();
    assert_eq!(doc["scenarios"][0]["label"], "light-day");
}

#[test]
fn stats_reports_the_reservoir_extension() {
    let out = psh(&["stats", "--case", arg(&bundled())]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["compactness"]["added_binaries"], 0);
    assert_eq!(v["compactness"]["added_variables"]["e"], 25);
    assert_eq!(v["compactness_formulas"]["soc_variables"], 25);
}

#[test]
fn lmp_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    let out = psh(&["lmp", "--case", arg(&bundled()), "--out", arg(&csv)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,lmp"));
    let prices: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(prices.len(), 24);
    assert!(prices.iter().all(|p| p.is_finite() && *p >= 0.0));
}

#[test]
fn missing_case_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = psh(&[
        "solve",
        "--case",
        arg(&dir.path().join("nope.json")),
        "--out",
        arg(&dir.path().join("r.json")),
    ]);
    assert_eq!(stderr_error(&out)["category"], "io");
}

#[test]
fn mistyped_field_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("bad.json");
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(bundled()).unwrap()).unwrap();
    v["psh_units"][1]["eta_gen"] = Value::String("high".into());
    std::fs::write(&case, v.to_string()).unwrap();
    let err = stderr_error(&psh(&["stats", "--case", arg(&case)]));
    assert_eq!(err["category"], "schema");
    assert!(err["message"]
        .as_str()
        .unwrap()
        .contains("psh_units[1].eta_gen"));
}

#[test]
fn negative_gap_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = psh(&[
        "solve",
        "--case",
        arg(&bundled()),
        "--gap=-1",
        "--out",
        arg(&dir.path().join("r.json")),
    ]);
    assert_eq!(stderr_error(&out)["category"], "usage");
}

#[test]
fn unknown_backend() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_psh"))
        .args([
            "solve",
            "--case",
            arg(&bundled()),
            "--out",
            arg(&dir.path().join("r.json")),
        ])
        .env("PSH_SOLVER_BACKEND", "cplex")
        .output()
        .unwrap();
    assert_eq!(stderr_error(&out)["category"], "solver");
}
