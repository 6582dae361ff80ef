use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

const GREEDYALL: &str = r#"{
  "goods": ["a", "b"],
  "bids": [
    {"bidder": "Red", "bundle": ["a"], "amount": "10"},
    {"bidder": "Green", "bundle": ["a", "b"], "amount": "19"},
    {"bidder": "Blue", "bundle": ["b"], "amount": "8"}
  ]
}"#;

fn camech(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_camech"))
        .args(args)
        .env_remove("CAMECH_SEED")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary starts");
    if let Some(s) = stdin {
        child.stdin.take().unwrap().write_all(s.as_bytes()).unwrap();
    } else {
        drop(child.stdin.take());
    }
    child.wait_with_output().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn write_temp(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_greedy_from_stdin() {
    let o = camech(&["run", "-"], Some(GREEDYALL));
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let granted: Vec<&str> = v["granted"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| g["bidder"].as_str().unwrap())
        .collect();
    assert_eq!(granted, ["Red", "Blue"]);
    assert_eq!(v["denied"][0]["bidder"], "Green");
    assert_eq!(v["denied"][0]["blocked_by"], "Red");
    assert_eq!(v["granted"][0]["payment"], "9.5");
    assert_eq!(v["revenue"], "9.5");
}

#[test]
fn run_gva_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_temp(&dir, "greedyp.json", GREEDYALL);
    let out = dir.path().join("out.json");
    let o = camech(
        &["run", &input, "--mechanism", "gva", "--output", out.to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["granted"][0]["bidder"], "Green");
    assert_eq!(v["granted"][0]["payment"], "18");
}

#[test]
fn run_square_root_norm_prints_decimals() {
    let inst = r#"{"goods":["a","b","c"],"bids":[
        {"bidder":"Pair","bundle":["a","b"],"amount":"10"},
        {"bidder":"Triple","bundle":["a","b","c"],"amount":"6"}]}"#;
    let o = camech(
        &["run", "-", "--norm-exponent", "1/2", "--tie-rule", "reject"],
        Some(inst),
    );
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["granted"][0]["payment"], "4.89897948557");
    assert_eq!(v["norm_exponent"], "1/2");
}

#[test]
fn empty_bids_give_empty_outcome() {
    let o = camech(&["run", "-"], Some(r#"{"goods":["a"],"bids":[]}"#));
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["granted"].as_array().unwrap().len(), 0);
    assert_eq!(v["revenue"], "0");
}

#[test]
fn exit_codes() {
    let bad_json = camech(&["run", "-"], Some("{"));
    assert_eq!(bad_json.status.code(), Some(2));
    let unknown = camech(
        &["run", "-"],
        Some(r#"{"goods":["a"],"bids":[{"bidder":"x","bundle":["z"],"amount":"1"}]}"#),
    );
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("z"));
    let tied = r#"{"goods":["a","b"],"bids":[
        {"bidder":"x","bundle":["a"],"amount":"1"},{"bidder":"y","bundle":["b"],"amount":"1"}]}"#;
    assert_eq!(
        camech(&["run", "-", "--tie-rule", "reject"], Some(tied)).status.code(),
        Some(3)
    );
    assert_eq!(
        camech(&["check", "-", "--tie-rule", "reject"], Some(tied))
            .status
            .code(),
        Some(3)
    );
    assert_eq!(camech(&["run", "-"], Some(tied)).status.code(), Some(0));
    assert_eq!(
        camech(&["gen", "--goods", "64", "--bids", "1"], None).status.code(),
        Some(4)
    );
    assert_eq!(
        camech(&["run", "-", "--mechanism", "nope"], Some(GREEDYALL))
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        camech(&["experiment", "--suite", "revenue", "--scenario", "nope"], None)
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn check_finds_the_clarke_lie() {
    let o = camech(
        &["check", "-", "--mechanism", "clarke-greedy", "--deviations"],
        Some(GREEDYALL),
    );
    assert_eq!(o.status.code(), Some(1));
    let v = json(&o);
    assert_eq!(v["passed"], false);
    let d = &v["deviations"][0];
    assert_eq!(d["bidder"], "Red");
    assert_eq!(d["truthful_utility"], "-1");
    assert_eq!(d["deviating_utility"], "0");
    let critical = v["axioms"]["entries"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["axiom"] == "critical")
        .unwrap();
    assert_eq!(critical["verdict"]["status"], "violated");
    assert_eq!(critical["verdict"]["witness"]["bidder"], "Red");
}

#[test]
fn check_greedy_passes() {
    let o = camech(
        &[
            "check",
            "-",
            "--deviations",
            "--axioms",
            "exactness,monotonicity,participation,critical",
        ],
        Some(GREEDYALL),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let v = json(&o);
    assert_eq!(v["axioms"]["entries"].as_array().unwrap().len(), 4);
    assert_eq!(v["deviations"].as_array().unwrap().len(), 0);
}

#[test]
fn gen_is_seeded() {
    let a = camech(&["gen", "--goods", "4", "--bids", "6", "--seed", "7"], None);
    let b = camech(&["gen", "--goods", "4", "--bids", "6", "--seed", "7"], None);
    let c = camech(&["gen", "--goods", "4", "--bids", "6", "--seed", "8"], None);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let env = Command::new(env!("CARGO_BIN_EXE_camech"))
        .args(["gen", "--goods", "4", "--bids", "6"])
        .env("CAMECH_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(env.stdout, a.stdout);
    let v = json(&a);
    assert_eq!(v["goods"].as_array().unwrap().len(), 4);
    assert_eq!(v["bids"].as_array().unwrap().len(), 6);
    let o = camech(
        &["run", "-", "--tie-rule", "reject", "--norm-exponent", "1/2"],
        Some(&String::from_utf8_lossy(&a.stdout)),
    );
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn experiment_suites() {
    let r = camech(&["experiment", "--suite", "reproduce"], None);
    assert_eq!(r.status.code(), Some(0));
    assert_eq!(json(&r)["passed"], true);
    let r = camech(
        &[
            "experiment",
            "--suite",
            "ratio",
            "--k",
            "8",
            "--n",
            "12",
            "--trials",
            "200",
            "--l",
            "1/2",
        ],
        None,
    );
    assert_eq!(r.status.code(), Some(0));
    let v = json(&r);
    assert_eq!(v["stats"]["violations"].as_array().unwrap().len(), 0);
    assert_eq!(v["stats"]["per_trial"].as_array().unwrap().len(), 200);
    let r = camech(&["experiment", "--suite", "revenue", "--scenario", "better"], None);
    let v = json(&r);
    assert_eq!(v["greedy_average"], "2/3");
    assert_eq!(v["gva_revenue"], "0");
    assert_eq!(v["orders"], 6);
    let r = camech(&["experiment", "--suite", "tight"], None);
    assert_eq!(r.status.code(), Some(0));
    assert_eq!(json(&r)["rows"].as_array().unwrap().len(), 6);
}
