use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

fn tac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tac")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixture(dir: &Path, name: &str) -> PathBuf {
    let out = dir.join(name);
    let o = tac(&["fixture", name, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out.join("preferences.jsonl")
}

#[test]
fn scores_the_toy_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let clean = fixture(dir.path(), "toy-clean");
    let noisy = fixture(dir.path(), "toy-noisy");
    let o = tac(&["tac", "-p", clean.to_str().unwrap(), "-w", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("tac=1.000000 P=4 Q=0"));
    let o = tac(&["tac", "-p", noisy.to_str().unwrap(), "-w", "1"]);
    assert!(stdout(&o).starts_with("tac=0.600000 P=4 Q=1"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("preference cycle among item2, item3, item4"));
    let o = tac(&["tac", "-p", noisy.to_str().unwrap(), "-w", "-1", "--format", "json", "--per-pair"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["tac"], -0.6);
    assert_eq!(v["per_pair"].as_array().unwrap().len(), 5);
}

#[test]
fn exit_codes_separate_input_and_degenerate_errors() {
    let dir = tempfile::tempdir().unwrap();
    let clean = fixture(dir.path(), "toy-clean");
    let missing = dir.path().join("absent.jsonl");
    assert_eq!(tac(&["tac", "-p", missing.to_str().unwrap(), "-w", "1"]).status.code(), Some(2));
    assert_eq!(tac(&["tac", "-p", clean.to_str().unwrap(), "-w", "1,2"]).status.code(), Some(2));
    assert_eq!(tac(&["tac", "-p", clean.to_str().unwrap(), "-w", "0"]).status.code(), Some(3));
    let o = tac(&["reproduce", "no-such-study"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("toy-noisy"));
}

#[test]
fn train_toy_with_plain_sgd() {
    let dir = tempfile::tempdir().unwrap();
    let noisy = fixture(dir.path(), "toy-noisy");
    let out = dir.path().join("run");
    let o = tac(&[
        "train", "-p", noisy.to_str().unwrap(), "--optimizer", "sgd", "--init", "zeros", "--lr", "0.1",
        "--epochs", "40", "--batch", "1", "--patience", "41", "--loss-delta", "0", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let weights: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("weights.json")).unwrap()).unwrap();
    assert_eq!(weights["schema"], "tac-train/1");
    let w = weights["weights"][0].as_f64().unwrap();
    assert!((2.0..=2.6).contains(&w), "{w}");
    let trace = std::fs::read_to_string(out.join("trace.tsv")).unwrap();
    assert_eq!(trace.lines().count(), 42);
    assert!(!out.join("grid.tsv").exists());
}

#[test]
fn standard_grid_writes_six_cells() {
    let dir = tempfile::tempdir().unwrap();
    let noisy = fixture(dir.path(), "toy-noisy");
    let out = dir.path().join("grid");
    let o = tac(&["train", "-p", noisy.to_str().unwrap(), "--standard-grid", "--epochs", "20", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let grid = std::fs::read_to_string(out.join("grid.tsv")).unwrap();
    assert_eq!(grid.lines().count(), 7);
    assert_eq!(grid.lines().filter(|l| l.ends_with("\ttrue")).count(), 1);
}

#[test]
fn fixture_json_round_trips() {
    let o = tac(&["fixture", "toy-noisy"]);
    let payload: tac_core::datalab::io::DatasetPayload = serde_json::from_str(&stdout(&o)).unwrap();
    let loaded = payload.into_dataset().unwrap();
    assert_eq!(loaded.dataset.len(), 5);
}

#[test]
fn synth_then_score_with_true_weights() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("syn");
    let o = tac(&["synth", "--dim", "3", "--trajectories", "30", "--preferences", "60", "--seed", "5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    let weights = text.lines().next().unwrap().strip_prefix("true_weights=").unwrap();
    let o = tac(&["tac", "-p", out.join("preferences.jsonl").to_str().unwrap(), "-w", weights]);
    assert!(stdout(&o).starts_with("tac=1.000000"), "{}", stdout(&o));
}

#[test]
fn reproduce_emits_pass_lines() {
    let o = tac(&["reproduce", "toy-clean"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().any(|l| l.starts_with("PASS")));
    assert!(!stdout(&o).contains("FAIL"));
}

fn request(addr: &str, method: &str, path: &str, body: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut response = String::new();
    s.read_to_string(&mut response).unwrap();
    let status = response[9..12].parse().unwrap();
    (status, response)
}

#[test]
fn serve_answers_and_stops() {
    let dir = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let mut child = Command::new(env!("CARGO_BIN_EXE_tac"))
        .args(["serve", "--data-dir", dir.path().to_str().unwrap(), "--bind", &addr])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    assert!(line.contains("listening"), "{line}");

    let payload = stdout(&tac(&["fixture", "toy-clean"]));
    let body = format!(r#"{{"condition":"alignment","dataset":{payload}}}"#);
    let (status, _) = request(&addr, "POST", "/sessions", &body);
    assert_eq!(status, 201);
    let (status, _) = request(&addr, "GET", "/sessions/missing", "");
    assert_eq!(status, 404);

    child.kill().unwrap();
    child.wait().unwrap();
    let logs = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(logs, 1);
}

#[test]
fn serve_reports_unusable_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain-file");
    std::fs::write(&file, "x").unwrap();
    let start = Instant::now();
    let o = tac(&["serve", "--data-dir", file.join("sub").to_str().unwrap(), "--bind", "127.0.0.1:0"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(start.elapsed() < Duration::from_secs(10));
}
