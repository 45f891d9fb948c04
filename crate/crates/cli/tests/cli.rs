use serde_json::Value;
use std::process::{Command, Output};

fn arw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arw"))
        .args(args)
        .env_remove("ARW_SEED")
        .output()
        .expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = arw(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("single JSON document")
}

#[test]
fn lattice_report() {
    let r = report(&["lattice", "--n", "5", "--json"]);
    assert_eq!(r["results"]["dim"], 8);
    assert!((r["results"]["tau4"].as_f64().unwrap() + 0.28).abs() < 1e-12);
    assert_eq!(r["results"]["points"].as_array().unwrap().len(), 8);
    assert_eq!(r["config"]["command"], "lattice");
    assert_eq!(r["config"]["params"]["n"], 5);
    assert!(r["version"].is_string());
    assert!(r["timing"].as_f64().unwrap() >= 0.0);
}

#[test]
fn scan_report() {
    let r = report(&["scan", "--l", "2", "--delta", "0.1", "--range", "64:128", "--json"]);
    let res = &r["results"];
    let scanned = res["scanned"].as_u64().unwrap();
    let exceptional = res["exceptional"].as_array().unwrap().len() as u64;
    assert!(scanned > 0);
    assert!((res["fraction"].as_f64().unwrap() - exceptional as f64 / scanned as f64).abs() < 1e-15);
    assert_eq!(res["range"], serde_json::json!([64, 128]));
}

#[test]
fn scan_csv_columns() {
    let dir = std::env::temp_dir().join(format!("arw-scan-{}.csv", std::process::id()));
    let path = dir.to_str().unwrap();
    report(&["scan", "--l", "2", "--delta", "0.1", "--range", "64:80", "--csv", path, "--json"]);
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "n,N_n,count,threshold,separated");
    assert!(text.lines().count() > 1);
    std::fs::remove_file(path).ok();
}

#[test]
fn schema_errors_exit_two() {
    assert_eq!(arw(&["lattice", "--n", "5", "--bogus"]).status.code(), Some(2));
    assert_eq!(arw(&["lattice"]).status.code(), Some(2));
    assert_eq!(arw(&["scan", "--l", "2", "--delta", "0.1", "--range", "64"]).status.code(), Some(2));
    assert_eq!(arw(&["lattice", "--n", "3"]).status.code(), Some(2));
}

#[test]
fn module_failures_map_to_exit_codes() {
    let out = arw(&["correlate", "--n", "1105", "--l", "6", "--work-limit", "10"]);
    assert_eq!(out.status.code(), Some(3));
    let out = arw(&["kernel", "--n", "5", "--x", "0,0"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn seed_is_echoed_and_reproducible() {
    let args = ["simulate", "--n", "5", "--s", "0.2", "--trials", "4", "--gpw", "8", "--seed", "11", "--json"];
    let a = report(&args);
    let b = report(&args);
    assert_eq!(a["config"]["seed"], 11);
    assert_eq!(a["config"]["seed_source"], "flag");
    assert_eq!(a["results"], b["results"]);

    let env = Command::new(env!("CARGO_BIN_EXE_arw"))
        .args(["lattice", "--n", "1", "--json"])
        .env("ARW_SEED", "42")
        .output()
        .unwrap();
    let r: Value = serde_json::from_slice(&env.stdout).unwrap();
    assert_eq!(r["config"]["seed"], 42);
    assert_eq!(r["config"]["seed_source"], "env");
}

#[test]
fn results_independent_of_thread_count() {
    let run = |t: &str| report(&["moments", "--n", "65", "--s", "0.1", "--threads", t, "--json"])["results"].clone();
    assert_eq!(run("1"), run("3"));
}

#[test]
fn kernel_and_kacrice_reports() {
    let r = report(&["kernel", "--n", "65", "--x", "0.1,-0.05", "--json"]);
    assert!(r["results"]["r"].is_number());
    assert_eq!(r["results"]["omega"].as_array().unwrap().len(), 4);
    assert!(r["warnings"].as_array().unwrap().is_empty());
    let out = arw(&["kacrice", "--n", "65", "--s", "0.45"]);
    assert_eq!(out.status.code(), Some(2));
}
