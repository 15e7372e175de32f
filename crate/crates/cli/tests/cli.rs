use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracedist")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn gen_is_deterministic_and_in_ball() {
    let a = run(&["gen", "--n", "24", "--k", "2", "--seed", "9"]);
    let b = run(&["gen", "--n", "24", "--k", "2", "--seed", "9"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = stdout_json(&a);
    assert_eq!(v["in_ball"], true);
    assert_ne!(v["x"], v["y"]);
    assert_eq!(v["x"].as_str().unwrap().len(), 24);
}

#[test]
fn zero_radius_is_a_validation_error() {
    let out = run(&["gen", "--k", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));
}

#[test]
fn unknown_lemma_and_bad_flags_exit_one() {
    assert_eq!(run(&["verify", "--lemma", "9"]).status.code(), Some(1));
    assert_eq!(run(&["gen", "--n", "10", "--precision-bits", "8"]).status.code(), Some(1));
    assert_eq!(run(&["distinguish", "--n", "10", "--q", "1.5"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn verify_lemma4_passes() {
    let out = run(&["verify", "--lemma", "4", "--max-p", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["failures"], 0);
}

#[test]
fn distinguish_reports_error_rate() {
    let out = run(&["distinguish", "--n", "16", "--k", "1", "--q", "1/5", "--trials", "4", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!(v["error_rate"].is_number());
    assert_eq!(v["config"]["q"], "1/5");
    assert_eq!(v["records"].as_array().unwrap().len(), 4);
}

#[test]
fn distinguish_reads_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"n": 14, "k": 1, "q": "1/4", "delta": 0.1, "trials": 3, "seed": 2, "N": 50}"#).unwrap();
    let out = run(&["distinguish", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["max_N"], 50);
    assert_eq!(v["config"]["seed"], 2);
}

#[test]
fn thread_count_does_not_change_results() {
    let args = ["distinguish", "--n", "18", "--k", "1", "--trials", "6", "--seed", "11"];
    let one = run(&[&args[..], &["--threads", "1"]].concat());
    let three = run(&[&args[..], &["--threads", "3"]].concat());
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, three.stdout);
}

#[test]
fn sweep_writes_seven_column_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep", "--n", "12,16,20", "--k", "1", "--q", "0.2", "--trials", "3", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,k,q,gap,N,error_rate,seed");
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|l| l.split(',').count() == 7));
}

#[test]
fn channel_sim_writes_header_and_traces() {
    let out = run(&["channel-sim", "--x", "0110100110", "--q", "0.5", "--N", "5", "--seed", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(header["n"], 10);
    assert_eq!(header["N"], 5);
    assert_eq!(header["seed"], 4);
    let traces: Vec<&str> = lines.collect();
    assert_eq!(traces.len(), 5);
    assert!(traces.iter().all(|t| t.len() <= 10 && t.chars().all(|c| c == '0' || c == '1')));
}

#[test]
fn noiseless_channel_returns_the_source() {
    let out = run(&["channel-sim", "--x", "10110", "--q", "0", "--N", "3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().skip(1).all(|t| t == "10110"));
}
