use std::process::{Command, Output};

use serde_json::Value;

const CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus");

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_countersmt"))
        .args(args)
        .current_dir(CORPUS)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn have_solver() -> bool {
    let ok = run(&["count-int", "example1.prob"]).status.success();
    if !ok {
        eprintln!("no solver available; skipping");
    }
    ok
}

#[test]
fn params_pins() {
    let v = json(&run(&["params", "--a", "1", "--eps", "0.2", "--alpha", "0.01", "--bits", "2"]));
    assert_eq!((v["q"].as_u64(), v["r"].as_u64(), v["m_star"].as_u64(), v["p"].as_u64()), (Some(12), Some(62), Some(21), Some(1)));
    assert_eq!(v["k_bits"], 24);
}

#[test]
fn params_interval() {
    let v = json(&run(&["params", "--a", "1", "--eps", "1/5", "--alpha", "1/100", "--bits", "2", "--m", "13"]));
    let root = |k: &str| v["interval"][k].as_f64().unwrap();
    assert!((root("lo_root") - 1.7268).abs() < 1e-3 && (root("hi_root") - 2.4542).abs() < 1e-3, "{v}");
}

#[test]
fn usage_errors_exit_1() {
    for args in [
        vec!["nosuch"],
        vec!["params", "--eps", "zero"],
        vec!["params", "--a", "1", "--eps", "0"],
        vec!["count-real", "example2.prob"],
        vec!["count-real", "example2.prob", "--grid", "8", "--formal"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_fails() {
    let out = run(&["count-int", "does-not-exist.prob", "--oracle"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
}

#[test]
fn oracle_backend_needs_no_solver() {
    let v = json(&run(&["count-int", "example1.prob", "--oracle"]));
    assert_eq!(v["result"]["value"], 2.0);
    assert_eq!(v["solver"], "oracle");
    let v = json(&run(&["value", "montyhall.ppl", "--oracle", "--enum-limit", "20"]));
    assert!((v["result"]["value"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn selftest_passes() {
    let out = run(&["selftest"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn table1_widths() {
    let v = json(&run(&["bench", CORPUS, "--table1-only"]));
    let rows = v["table1"].as_array().unwrap();
    let k = |name: &str| rows.iter().find(|r| r["program"] == name).unwrap()["k_prime"].as_u64().unwrap();
    assert_eq!((k("montyhall"), k("prisoners")), (24, 36));
    assert_eq!(rows.len(), 5);
}

#[test]
fn incomplete_corpus_is_reported() {
    let dir = std::env::temp_dir().join(format!("countersmt-empty-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::copy(format!("{CORPUS}/montyhall.ppl"), dir.join("montyhall.ppl")).unwrap();
    let out = run(&["bench", dir.to_str().unwrap(), "--table1-only"]);
    let _ = std::fs::remove_dir_all(&dir);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("prisoners.ppl") && !err.contains("montyhall.ppl"), "{err}");
}

#[test]
fn solver_counts_and_snap() {
    if !have_solver() {
        return;
    }
    let v = json(&run(&["count-int", "example1.prob", "--enum-limit", "20"]));
    assert_eq!(v["result"]["value"], 2.0);
    let v = json(&run(&[
        "count-int",
        "montyhall_acc.prob",
        "--enum-limit",
        "1",
        "--eps",
        "0.2",
        "--alpha",
        "0.01",
        "--seed",
        "7",
        "--snap-int",
    ]));
    assert_eq!(v["result"]["snapped"], 2, "{v}");
    assert!(!v["votes"].as_array().unwrap().is_empty());
}

#[test]
fn value_runs_are_reproducible() {
    if !have_solver() {
        return;
    }
    let args = ["value", "prisoners.ppl", "--enum-limit", "1", "--eps", "0.5", "--seed", "3"];
    let (mut a, mut b) = (json(&run(&args)), json(&run(&args)));
    a["wall_time_s"] = Value::Null;
    b["wall_time_s"] = Value::Null;
    assert_eq!(a, b);
}
