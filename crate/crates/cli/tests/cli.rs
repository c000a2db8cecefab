use std::process::{Command, Output};

use serde_json::Value;

fn resoforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resoforge"))
        .args(args)
        .env_remove("RESOFORGE_THREADS")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn bezout_reports_unit_determinant() {
    let out = resoforge(&["bezout", "--k", "2,3"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["result"]["det"], "1");
    assert_eq!(r["result"]["A"][0], serde_json::json!([2, 3]));
    assert!(r["flags"].as_array().unwrap().iter().all(|f| f["pass"] == true));
}

#[test]
fn bezout_accepts_negative_entries() {
    let out = resoforge(&["bezout", "--k", "-3,5,7"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["result"]["det"], "1");
}

#[test]
fn non_generator_is_a_config_error() {
    let out = resoforge(&["bezout", "--k", "2,4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not a generator"));
}

#[test]
fn missing_alpha_is_a_config_error() {
    let out = resoforge(&["cover", "measure", "--samples", "100"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn lacunary_preset_is_in_class() {
    let out = resoforge(&[
        "--preset",
        "lacunary",
        "--beta",
        "1e-30",
        "check-generic",
        "--kmax",
        "70",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["result"]["membership"]["in_class"], true);
}

#[test]
fn cover_classify_labels_points() {
    let out = resoforge(&[
        "--alpha", "0.02", "--k0", "2", "--kcut", "8", "cover", "classify", "--point", "0.3,-0.2", "--point", "0.5,0.5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let points = r["result"]["points"].as_array().unwrap();
    assert_eq!(points.len(), 2);
    assert_eq!(points[1]["labels"][0]["kind"], "R1");
    assert_eq!(points[1]["labels"][0]["k"], serde_json::json!([1, -1]));
}

#[test]
fn sample_writes_a_loadable_potential() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.json");
    let path_str = path.to_str().unwrap();
    let out = resoforge(&["--seed", "4", "sample", "--kmax", "5", "--write", path_str]);
    assert_eq!(out.status.code(), Some(0));
    let out = resoforge(&[
        "--potential",
        path_str,
        "--alpha",
        "0.02",
        "cover",
        "classify",
        "--point",
        "0.1,0.2",
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn saved_config_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let cfg_str = cfg.to_str().unwrap();
    let first = resoforge(&[
        "--save-config",
        cfg_str,
        "--seed",
        "7",
        "--alpha",
        "0.05",
        "cover",
        "measure",
        "--samples",
        "20000",
    ]);
    assert_eq!(first.status.code(), Some(0));
    let second = resoforge(&["--config", cfg_str]);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(report(&first)["result"], report(&second)["result"]);
}

#[test]
fn standardize_benchmark_passes_hard_flags() {
    let out = resoforge(&[
        "--preset",
        "two-mode",
        "--eps",
        "1e-7",
        "--alpha",
        "0.01",
        "--k0",
        "2",
        "--kcut",
        "12",
        "--beta",
        "1",
        "standardize",
        "--k",
        "1,0",
        "--base-point",
        "0,0.6",
        "--samples",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    for flag in r["flags"].as_array().unwrap().iter().filter(|f| f["hard"] == true) {
        assert_eq!(flag["pass"], true, "{flag}");
    }
}

#[test]
fn quick_report_is_deterministic() {
    let args = ["report", "--quick", "--only", "1,11"];
    let a = resoforge(&args);
    let b = resoforge(&args);
    assert_eq!(a.status.code(), Some(0));
    let (ra, rb) = (report(&a), report(&b));
    let strip = |r: &Value| {
        r["result"]["suite"]["criteria"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| (c["id"].clone(), c["pass"].clone(), c["detail"].clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&ra), strip(&rb));
    assert_eq!(strip(&ra).len(), 2);
}
