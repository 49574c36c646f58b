use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn harmonet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harmonet")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Column `name` of a CSV with a header row.
fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const ONE_MASS: &str = r#"{"n": 1, "masses": [1.0], "springs": [[1, 1, 1.0]], "d": 1}"#;
const TRIANGLE: &str = r#"{"n": 3, "masses": [1.0, 2.0, 1.5], "springs": [[2, 1, 1.0], [2, 3, 0.7], [1, 1, 0.3]], "d": 2}"#;

#[test]
fn simulate_one_mass_follows_cosine() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "one_mass.json", ONE_MASS);
    for backend in ["exact", "hamiltonian", "qpe", "verlet"] {
        let out = harmonet(&["simulate", "--network", s(&net), "--t", "2.5", "--backend", backend]);
        assert!(out.status.success(), "{backend}: {}", String::from_utf8_lossy(&out.stderr));
        let x = column(&stdout(&out), "x_1");
        assert_eq!(x.len(), 1);
        // default Verlet step is 0.01 here: phase error about t dt^2 / 24
        let tol = if backend == "verlet" { 2e-5 } else { 1e-6 };
        assert!((x[0] - 2.5f64.cos()).abs() < tol, "{backend}: {}", x[0]);
    }
}

#[test]
fn simulate_header_and_digits() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "tri.json", TRIANGLE);
    let out = harmonet(&["simulate", "--network", s(&net), "--t", "2", "--samples", "5"]);
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "t,x_1,x_2,x_3,v_1,v_2,v_3,K,U,E");
    assert_eq!(text.lines().count(), 6);
    let first_field = text.lines().nth(1).unwrap().split(',').nth(1).unwrap();
    let mantissa = first_field.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
    assert_eq!(mantissa.len(), 17);
    let e = column(&text, "E");
    assert!(e.iter().all(|v| (v - e[0]).abs() < 1e-12));
}

#[test]
fn simulate_reads_initial_state() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "one_mass.json", ONE_MASS);
    let state = write(&dir, "state.json", r#"{"x": [0.0], "v": [1.0]}"#);
    let out = harmonet(&["simulate", "--network", s(&net), "--t", "1", "--state", s(&state)]);
    let x = column(&stdout(&out), "x_1");
    assert!((x[0] - 1f64.sin()).abs() < 1e-12);
    let bad = write(&dir, "bad.json", r#"{"x": [0.0, 1.0], "v": [1.0]}"#);
    assert_eq!(harmonet(&["simulate", "--network", s(&net), "--t", "1", "--state", s(&bad)]).status.code(), Some(2));
}

#[test]
fn invalid_network_exits_two() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "neg.json", r#"{"n": 1, "masses": [1.0], "springs": [[1, 1, -1.0]], "d": 1}"#);
    let out = harmonet(&["simulate", "--network", s(&net), "--t", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
    assert_eq!(harmonet(&["simulate", "--network", "/nonexistent.json", "--t", "1"]).status.code(), Some(2));
    assert_eq!(harmonet(&["simulate", "--bogus"]).status.code(), Some(2));
}

#[test]
fn glued_trees_reduced_peak_near_forty() {
    let out = harmonet(&["glued-trees", "--n", "20", "--mode", "reduced", "--tmax", "80"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let t = column(&text, "t");
    let e = column(&text, "exit_kinetic");
    let (peak_t, peak) = t.iter().zip(&e).fold((0.0, 0.0), |b, (t, e)| if *e > b.1 { (*t, *e) } else { b });
    assert!(peak > 0.05, "peak {peak}");
    assert!((30.0..=50.0).contains(&peak_t), "peak at {peak_t}");
}

#[test]
fn glued_trees_full_mode_capped() {
    let out = harmonet(&["glued-trees", "--n", "11", "--mode", "full"]);
    assert_eq!(out.status.code(), Some(3));
    let ok = harmonet(&["glued-trees", "--n", "3", "--mode", "full", "--seed", "4", "--tmax", "5"]);
    assert!(ok.status.success());
}

#[test]
fn glued_trees_solve_finds_exit() {
    let out = harmonet(&["glued-trees", "--n", "4", "--mode", "solve", "--seed", "9"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["correct"], true);
}

#[test]
fn bqp_perfect_chain_inequality() {
    let out = harmonet(&["bqp", "perfect-chain", "--L", "10"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["inequality_ok"], true);
    assert!(v["transfer_exp"].as_f64().unwrap() > 1.0 - 1e-8);
}

#[test]
fn bqp_compile_exports_network() {
    let dir = TempDir::new().unwrap();
    let circuit = write(&dir, "c.json", r#"{"q": 2, "gates": [["H"], ["X", 1], ["H", 2]]}"#);
    let out_path = dir.path().join("compiled.json");
    let out = harmonet(&["bqp", "compile", "--circuit", s(&circuit), "--out", s(&out_path)]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["oscillators"].as_f64().unwrap(), 32.0);
    assert_eq!(v["output_index"].as_f64().unwrap(), 25.0);
    assert_eq!(v["network"]["d"].as_f64().unwrap(), 4.0);
}

#[test]
fn bqp_rejects_consecutive_hadamards() {
    let dir = TempDir::new().unwrap();
    let circuit = write(&dir, "c.json", r#"{"q": 1, "gates": [["H"], ["H"]]}"#);
    assert_eq!(harmonet(&["bqp", "compile", "--circuit", s(&circuit)]).status.code(), Some(2));
    let big = write(&dir, "big.json", r#"{"q": 7, "gates": [["X", 1]]}"#);
    assert_eq!(harmonet(&["bqp", "run", "--circuit", s(&big), "--t", "1"]).status.code(), Some(3));
}

#[test]
fn bqp_decide_exit_codes() {
    let dir = TempDir::new().unwrap();
    let circuit = write(&dir, "xx.json", r#"{"q": 1, "gates": [["X", 1], ["X", 1]]}"#);
    let c = s(&circuit);
    let yes = harmonet(&["bqp", "decide", "--circuit", c, "--tmax", "20", "--yes", "0.1", "--no", "0.001"]);
    assert!(yes.status.success());
    assert_eq!(json(&yes)["decision"], "yes");
    let gap = harmonet(&["bqp", "decide", "--circuit", c, "--tmax", "20", "--yes", "0.9", "--no", "0.001"]);
    assert_eq!(gap.status.code(), Some(4));
    assert_eq!(json(&gap)["decision"], "indeterminate");
    let single = write(&dir, "x.json", r#"{"q": 1, "gates": [["X", 1]]}"#);
    let no = harmonet(&["bqp", "decide", "--circuit", s(&single), "--tmax", "20", "--yes", "0.1", "--no", "1e-20"]);
    assert_eq!(json(&no)["decision"], "no");
}

#[test]
fn blockenc_verify_reports_budget() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "tri.json", TRIANGLE);
    let out = harmonet(&["blockenc", "verify", "--network", s(&net), "--r", "8"]);
    assert!(out.status.success());
    let v = json(&out);
    let achieved = v["achieved_error"].as_f64().unwrap();
    assert!(achieved <= 4.0 * v["predicted_error"].as_f64().unwrap());
    assert_eq!(v["lambda"].as_f64().unwrap(), 2.0);
    assert_eq!(v["r"].as_f64().unwrap(), 8.0);
    let circuit = harmonet(&["blockenc", "verify", "--network", s(&net), "--r", "8", "--circuit"]);
    assert!((json(&circuit)["achieved_error"].as_f64().unwrap() - achieved).abs() < 1e-12);
}

#[test]
fn estimate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "tri.json", TRIANGLE);
    let args = ["estimate", "kinetic", "--network", s(&net), "--subset", "1,2", "--t", "3.0", "--epsilon", "0.05", "--delta", "0.01", "--seed", "7"];
    let a = harmonet(&args);
    let b = harmonet(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["shots_used"].as_f64().unwrap(), 1060.0);
    assert!((v["estimate"].as_f64().unwrap() - v["exact_value"].as_f64().unwrap()).abs() <= 0.05);
    let other_seed = harmonet(&["estimate", "kinetic", "--network", s(&net), "--subset", "1,2", "--t", "3.0", "--epsilon", "0.05", "--delta", "0.01", "--seed", "8"]);
    assert_ne!(a.stdout, other_seed.stdout);
}

#[test]
fn estimate_potential_takes_pairs() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "tri.json", TRIANGLE);
    let out = harmonet(&["estimate", "potential", "--network", s(&net), "--subset", "1-2,2-3,1-1", "--t", "0", "--epsilon", "0.1", "--delta", "0.1"]);
    assert!(out.status.success());
    // x = e_1 at rest: all energy is potential
    assert_eq!(json(&out)["exact_value"].as_f64().unwrap(), 1.0);
    let bad = harmonet(&["estimate", "potential", "--network", s(&net), "--subset", "1:2", "--t", "0", "--epsilon", "0.1", "--delta", "0.1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn every_subcommand_has_help() {
    for path in [
        vec!["simulate"],
        vec!["glued-trees"],
        vec!["bqp", "compile"],
        vec!["bqp", "run"],
        vec!["bqp", "decide"],
        vec!["bqp", "perfect-chain"],
        vec!["bqp", "overlap"],
        vec!["blockenc", "verify"],
        vec!["estimate", "kinetic"],
        vec!["estimate", "potential"],
    ] {
        let mut args = path.clone();
        args.push("--help");
        let out = harmonet(&args);
        assert!(out.status.success(), "{path:?}");
        assert!(stdout(&out).contains("--"), "{path:?}");
    }
}
