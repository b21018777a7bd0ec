use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rsmdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsmdp"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

const SINGLE: &str = r#"{
  "states": ["s"],
  "actions": ["stay"],
  "transitions": { "stay": [[1.0]] },
  "rewards": { "stay": [2.5] }
}"#;

fn write_model(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn check_exit_codes() {
    let ok = rsmdp(&["check", "ex1"]);
    assert_eq!(code(&ok), 0);
    assert_eq!(json(&ok)["all_hold"], Value::Bool(true));

    let adv = rsmdp(&["check", "ex4", "--epsilon", "0"]);
    assert_eq!(code(&adv), 3);
    assert_eq!(json(&adv)["all_hold"], Value::Bool(false));
}

#[test]
fn solve_example1_gain() {
    let out = rsmdp(&["solve", "ex1", "--gamma", "1"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let e = std::f64::consts::E;
    let want = (0.3 / e + 0.4 + 0.3 * e).ln();
    assert!((v["lambda"].as_f64().unwrap() - want).abs() < 1e-9);
    assert_eq!(v["canonical_rule"], serde_json::json!(["3", "3", "3"]));
}

#[test]
fn solve_negative_gamma_parses() {
    let out = rsmdp(&["solve", "ex1", "--gamma", "-1"]);
    assert_eq!(code(&out), 0);
    let e = std::f64::consts::E;
    // at gamma = -1 the most concentrated kernel wins
    let want = -(0.1 * e + 0.8 + 0.1 / e).ln();
    assert!((json(&out)["lambda"].as_f64().unwrap() - want).abs() < 1e-9);
}

#[test]
fn sweep_example2_boundaries() {
    let out = rsmdp(&["sweep", "ex2", "--from", "-2", "--to", "2"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let s5 = 5f64.sqrt();
    let want = [((3.0 - s5) / 2.0).ln(), ((3.0 + s5) / 2.0).ln()];
    let got: Vec<f64> = v["boundaries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["gamma"].as_f64().unwrap())
        .collect();
    assert_eq!(got.len(), 2);
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-8, "{g} vs {w}");
    }
}

#[test]
fn sweep_csv_to_stdout() {
    let out = rsmdp(&["--format", "csv", "sweep", "ex2", "--step", "0.5"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("gamma,rule_id,lambda,optimal"));
    // 13 grid points and 16 rules
    assert_eq!(lines.count(), 13 * 16);
}

#[test]
fn discount_single_state_value() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_model(dir.path(), "single.json", SINGLE);
    for gamma in ["-2", "0", "0.5"] {
        let out = rsmdp(&["discount", &path, "--gamma", gamma, "--beta", "0.75"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let v = json(&out);
        let got = v["value"][0]["value"].as_f64().unwrap();
        assert!((got - 2.5 / 0.25).abs() < 1e-8, "gamma {gamma}: {got}");
    }
}

#[test]
fn blackwell_level_zero_on_example4() {
    let out = rsmdp(&["blackwell", "ex4", "--gamma", "-1", "--epsilon", "0"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["status"], "found");
    assert_eq!(v["threshold"].as_f64().unwrap(), 0.5);
}

#[test]
fn vanish_distances_shrink() {
    let out = rsmdp(&[
        "--format", "csv", "vanish", "ex1", "--gamma", "1", "--betas", "0.5,0.9,0.99",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let dists: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(dists.len(), 3);
    assert!(dists.windows(2).all(|w| w[1] < w[0]), "{dists:?}");
}

#[test]
fn simulate_single_state_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_model(dir.path(), "single.json", SINGLE);
    let out = rsmdp(&[
        "simulate", &path, "--policy", "astay", "--gamma", "-1.5", "--avg", "--n", "20", "--m", "50",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!((v["result"]["estimate"].as_f64().unwrap() - 2.5).abs() < 1e-12);
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "single.json", SINGLE);
    let run_dir = dir.path().join("run");
    let run = run_dir.to_string_lossy().into_owned();
    let out = rsmdp(&[
        "--out", &run, "simulate", &model, "--policy", "astay", "--gamma", "1", "--beta", "0.5",
        "--m", "100", "--seed", "9",
    ]);
    assert_eq!(code(&out), 0);
    // the manifest embeds the model, so the source file may go away
    fs::remove_file(&model).unwrap();
    let manifest = run_dir.join("manifest.json");
    let m = manifest.to_string_lossy().into_owned();
    let again = rsmdp(&["replay", &m]);
    assert_eq!(code(&again), 0);
    assert!(String::from_utf8(again.stdout).unwrap().contains("identical simulate.json"));

    fs::write(run_dir.join("simulate.json"), "{}").unwrap();
    assert_eq!(code(&rsmdp(&["replay", &m])), 1);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&rsmdp(&["solve", "ex1", "--gammma", "1"])), 2);
    assert_eq!(code(&rsmdp(&["check", "ex1", "--epsilon", "0.01"])), 2);
    assert_eq!(code(&rsmdp(&["check", "ex4", "--epsilon", "0.5"])), 2);
    assert_eq!(code(&rsmdp(&["check", "no/such/model.json"])), 2);
}

#[test]
fn bad_rows_need_renormalize() {
    let dir = tempfile::tempdir().unwrap();
    let text = SINGLE.replace("[[1.0]]", "[[0.9]]");
    let path = write_model(dir.path(), "bad.json", &text);
    assert_eq!(code(&rsmdp(&["check", &path])), 2);
    assert_eq!(code(&rsmdp(&["check", &path, "--renormalize"])), 0);
}

#[test]
fn risk_neutral_example1_ties_everything() {
    let v = json(&rsmdp(&["solve", "ex1", "--gamma", "0"]));
    assert!(v["lambda"].as_f64().unwrap().abs() < 1e-12);
    for s in v["optimal_actions"].as_array().unwrap() {
        assert_eq!(s["actions"].as_array().unwrap().len(), 3);
    }
}

#[test]
fn example3_risk_averse_rule() {
    let v = json(&rsmdp(&["solve", "ex3", "--gamma", "-1"]));
    assert_eq!(v["canonical_rule"], serde_json::json!(["2", "2", "2", "2"]));
}

#[test]
fn example2_is_primitive_in_one_step() {
    let out = rsmdp(&["check", "ex2"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["primitive"], Value::Bool(true));
    assert_eq!(v["n_steps"], 1);
}

#[test]
fn discount_example4_switches_after_first_gamble() {
    let out = rsmdp(&["discount", "ex4", "--epsilon", "0", "--gamma", "-1", "--beta", "0.5"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let first = v["value"][0]["value"].as_f64().unwrap();
    assert!((first - 1.64).abs() < 5e-3, "{first}");
    let levels = v["levels"].as_array().unwrap();
    assert_ne!(levels[0]["rule"], levels[2]["rule"]);
    assert_eq!(levels[2]["rule"], serde_json::json!(["1", "1", "1"]));
}

#[test]
fn sweep_example3_flags_isolated_tie() {
    let v = json(&rsmdp(&["sweep", "ex3"]));
    let b = v["boundaries"].as_array().unwrap();
    assert_eq!(b.len(), 1);
    assert_eq!(b[0]["gamma"].as_f64().unwrap(), 0.0);
    let isolated = v["regions"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["intervals"][0]["isolated"] == Value::Bool(true))
        .count();
    assert!(isolated > 0);
}

#[test]
fn sweep_example1_meets_at_zero() {
    let v = json(&rsmdp(&["sweep", "ex1"]));
    let regions = v["regions"].as_array().unwrap();
    let wide: Vec<&Value> = regions
        .iter()
        .filter(|r| r["intervals"][0]["isolated"] == Value::Bool(false))
        .collect();
    assert_eq!(wide.len(), 2);
    assert_eq!(wide[0]["intervals"][0]["hi"]["gamma"].as_f64().unwrap(), 0.0);
    assert_eq!(wide[1]["intervals"][0]["lo"]["gamma"].as_f64().unwrap(), 0.0);
}
