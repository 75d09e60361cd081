//! End-to-end checks of the grandlab binary: exit codes, report files, the
//! catalog listing, and byte-level determinism of repeated runs.

use std::fs;
use std::path::Path;

use assert_cmd::Command;
use predicates::prelude::*;
use serde_json::Value;

fn grandlab() -> Command {
    Command::cargo_bin("grandlab").unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn report(dir: &Path) -> Value {
    let text = fs::read_to_string(dir.join("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn catalog_is_sorted_and_lists_the_power_weight() {
    let out = grandlab().arg("catalog").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("power-weight"));
    assert!(text.contains("|x|^beta") || text.contains("beta"));
    let names: Vec<&str> = text
        .lines()
        .filter_map(|l| l.split_whitespace().next())
        .collect();
    let mut sorted = names.clone();
    sorted.sort_unstable();
    assert_eq!(names, sorted, "listing must be sorted by name");

    let again = grandlab().arg("catalog").output().unwrap();
    assert_eq!(again.stdout, text.as_bytes(), "listing must be stable");
}

#[test]
fn catalog_json_flag_yields_an_array() {
    let out = grandlab().args(["catalog", "--json"]).output().unwrap();
    assert!(out.status.success());
    let parsed: Value = serde_json::from_slice(&out.stdout).unwrap();
    let entries = parsed.as_array().expect("array of catalog entries");
    assert!(entries.iter().any(|e| e["name"] == "power-weight"));
}

#[test]
fn grand_norm_fixture_reports_unit_value() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &format!(
            r#"{{
  "scenario": "grand-norm",
  "domain": {{ "lower": [0.0], "upper": [1.0], "resolution": [2048] }},
  "function": {{ "id": "indicator", "params": [0.0, 1.0] }},
  "q": 2.0,
  "output_dir": "{}"
}}"#,
            out_dir.display()
        ),
    );
    grandlab().args(["run", &cfg]).assert().success();
    let rep = report(&out_dir);
    let value = rep["value"].as_f64().unwrap();
    assert!((value - 1.0).abs() < 1e-3, "value {value}");
    let profile = fs::read_to_string(out_dir.join("profile.csv")).unwrap();
    assert!(profile.starts_with("epsilon,norm\n"));
    assert!(profile.lines().count() > 100);
}

#[test]
fn trivial_weight_has_unit_muckenhoupt_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &format!(
            r#"{{
  "scenario": "aq",
  "domain": {{ "lower": [-8.0], "upper": [8.0], "resolution": [512] }},
  "weight": {{ "name": "constant" }},
  "q": 2.0,
  "output_dir": "{}"
}}"#,
            out_dir.display()
        ),
    );
    grandlab().args(["run", &cfg]).assert().success();
    assert_eq!(report(&out_dir)["value"], 1.0);
}

#[test]
fn missing_q_is_rejected_without_writing_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &format!(
            r#"{{
  "scenario": "aq",
  "domain": {{ "lower": [-8.0], "upper": [8.0], "resolution": [512] }},
  "weight": {{ "name": "constant" }},
  "output_dir": "{}"
}}"#,
            out_dir.display()
        ),
    );
    grandlab()
        .args(["run", &cfg])
        .assert()
        .code(2)
        .stderr(predicate::str::contains("`q`"));
    assert!(!out_dir.join("report.json").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        r#"{ "scenario": "aq", "qq": 2.0 }"#,
    );
    grandlab()
        .args(["run", &cfg])
        .assert()
        .code(2)
        .stderr(predicate::str::contains("qq"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let out_dir = tmp.path().join(tag);
        let cfg = write_config(
            tmp.path(),
            &format!("cfg_{tag}.json"),
            &format!(
                r#"{{
  "scenario": "hajlasz-verify",
  "domain": {{ "lower": [-1.0], "upper": [1.0], "resolution": [512] }},
  "function": {{ "id": "bump", "params": [1.0, 0.6, 0.1] }},
  "constant": 1.0,
  "pair_strategy": {{ "strategy": "combined", "count": 500, "seed": 42 }},
  "output_dir": "{}"
}}"#,
                out_dir.display()
            ),
        );
        grandlab().args(["run", &cfg]).assert().success();
        outputs.push((
            fs::read(out_dir.join("report.json")).unwrap(),
            fs::read(out_dir.join("pairs.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0].0, outputs[1].0, "report.json must be deterministic");
    assert_eq!(outputs[0].1, outputs[1].1, "pairs.csv must be deterministic");
}

#[test]
fn failed_verification_exits_one_but_writes_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &format!(
            r#"{{
  "scenario": "hajlasz-verify",
  "domain": {{ "lower": [-1.0], "upper": [1.0], "resolution": [1024] }},
  "function": {{ "id": "indicator", "params": [0.0, 1.0] }},
  "gradient": {{ "id": "constant", "params": [1.0] }},
  "pair_strategy": {{ "strategy": "nearest-neighbor" }},
  "c_bound": 10.0,
  "output_dir": "{}"
}}"#,
            out_dir.display()
        ),
    );
    grandlab().args(["run", &cfg]).assert().code(1);
    let rep = report(&out_dir);
    assert_eq!(rep["passed"], false);
    assert!(rep["report"]["minimal_constant"].as_f64().unwrap() > 10.0);
    assert!(out_dir.join("pairs.csv").exists());
}

#[test]
fn hedberg_scenario_passes_for_a_bump() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &format!(
            r#"{{
  "scenario": "hedberg",
  "domain": {{ "lower": [-2.0], "upper": [2.0], "resolution": [512] }},
  "function": {{ "id": "bump", "params": [1.2, 0.8, 0.3] }},
  "point": [0.1],
  "t": 0.5,
  "output_dir": "{}"
}}"#,
            out_dir.display()
        ),
    );
    grandlab().args(["run", &cfg]).assert().success();
    assert_eq!(report(&out_dir)["passed"], true);
}

#[test]
fn upper_embedding_scenario_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &format!(
            r#"{{
  "scenario": "embed",
  "embedding": "upper",
  "domain": {{ "lower": [-1.0], "upper": [1.0], "resolution": [256] }},
  "function": {{ "id": "sine", "params": [1.0, 2.0] }},
  "weight": {{ "name": "exp-decay", "params": [1.0] }},
  "grandizer": {{ "name": "exp-decay", "params": [1.0] }},
  "q": 2.0,
  "output_dir": "{}"
}}"#,
            out_dir.display()
        ),
    );
    grandlab().args(["run", &cfg]).assert().success();
    assert_eq!(report(&out_dir)["passed"], true);
}

#[test]
fn bench_rejects_an_empty_radius_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        r#"{ "scenario": "bench", "radii": [] }"#,
    );
    grandlab()
        .args(["bench", &cfg])
        .assert()
        .code(2)
        .stderr(predicate::str::contains("radii"));
}

#[test]
fn bench_times_both_paths_and_holds_comparability() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &format!(
            r#"{{
  "scenario": "bench",
  "resolutions": [64, 128],
  "output_dir": "{}"
}}"#,
            out_dir.display()
        ),
    );
    grandlab().args(["bench", &cfg]).assert().success();
    let csv = fs::read_to_string(out_dir.join("bench.csv")).unwrap();
    assert!(csv.starts_with("path,dim,resolution,cells,wall_ms,speedup\n"));
    // One brute and one fast row per (dim, resolution) combination.
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
    assert!(csv.contains("fast,1,128"));
    assert!(csv.contains("brute,2,64"));
    assert_eq!(report(&out_dir)["passed"], true);
}

#[test]
fn bench_subcommand_insists_on_a_bench_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        r#"{ "scenario": "aq", "q": 2.0 }"#,
    );
    grandlab()
        .args(["bench", &cfg])
        .assert()
        .code(2)
        .stderr(predicate::str::contains("scenario"));
}
