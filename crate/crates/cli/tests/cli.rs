use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

fn abcd() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_abcd"));
    c.env("ABCD_LOG", "error");
    c
}

fn run(args: &[&str]) -> Output {
    abcd().args(args).output().expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn enumerate_counts() {
    for (d, n) in [("1", "1"), ("2", "3"), ("3", "25"), ("4", "543")] {
        let o = run(&["enumerate", "--d", d]);
        assert!(o.status.success());
        assert_eq!(stdout(&o).trim(), n);
    }
}

#[test]
fn enumerate_lists_graphs() {
    let o = run(&["enumerate", "--d", "2", "--list"]);
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines[0], "3");
    assert_eq!(lines.len(), 4);
    for l in &lines[1..] {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert_eq!(v["d"], 2);
    }
}

#[test]
fn enumerate_out_of_range_is_a_config_error() {
    for d in ["0", "6"] {
        let o = run(&["enumerate", "--d", d]);
        assert_eq!(o.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&o.stderr).contains("--d"));
    }
}

fn simulate(cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    abcd()
        .args(["simulate", "--config"])
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

#[test]
fn simulate_writes_a_complete_run_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = simulate(&config("fig2_var.json"), &out, &["--seed", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["manifest.json", "trace.jsonl", "summary.csv", "diagnostics.json", "initial.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 4);
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(csv.starts_with("t,target,value,eig,entropy,p_true,expected_shd\n"));
    let trace_lines = std::fs::read_to_string(out.join("trace.jsonl")).unwrap().lines().count();
    assert_eq!(csv.lines().count(), trace_lines + 2);
}

#[test]
fn simulate_is_reproducible_and_rerun_replaces() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = ["--seed", "2", "--strategy", "bo", "--steps", "3", "--mc-samples", "16", "--bo-budget", "5"];
    assert!(simulate(&config("fig2_sd.json"), &a, &args).status.success());
    assert!(simulate(&config("fig2_sd.json"), &b, &args).status.success());
    let trace = |p: &Path| std::fs::read(p.join("trace.jsonl")).unwrap();
    assert_eq!(trace(&a), trace(&b));
    // running again over an existing run directory replaces it
    assert!(simulate(&config("fig2_sd.json"), &a, &args).status.success());
    assert_eq!(trace(&a), trace(&b));
}

#[test]
fn simulate_refuses_a_foreign_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("keep.txt"), "x").unwrap();
    let o = simulate(&config("fig2_var.json"), dir.path(), &["--steps", "1"]);
    assert!(!o.status.success());
    assert!(dir.path().join("keep.txt").is_file());
}

#[test]
fn strategies_produce_different_designs() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for s in ["bo", "random"] {
        let out = dir.path().join(s);
        let o = simulate(&config("fig2_var.json"), &out, &["--strategy", s, "--steps", "3", "--mc-samples", "16", "--bo-budget", "5"]);
        assert!(o.status.success());
        csvs.push(std::fs::read_to_string(out.join("summary.csv")).unwrap());
    }
    assert_ne!(csvs[0], csvs[1]);
    // random designs carry no information-gain value
    let row = csvs[1].lines().nth(2).unwrap();
    assert_eq!(row.split(',').nth(3), Some(""));
    let row = csvs[0].lines().nth(2).unwrap();
    assert!(row.split(',').nth(3).unwrap().parse::<f64>().is_ok());
}

#[test]
fn unknown_strategy_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(&config("fig2_var.json"), &dir.path().join("r"), &["--strategy", "greedy"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("round_robin"));
}

#[test]
fn missing_mechanism_names_the_node() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"schema": "abcd.episode/1", "scm": {"graph": {"d": 2, "edges": [[0, 1]]}, "mechanisms": [],
            "roots": [{"node": 0, "mean": 0.0, "sd": 1.0}]}, "n_obs": 5, "max_steps": 2}"#,
    )
    .unwrap();
    let o = simulate(&cfg, &dir.path().join("r"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing mechanism for node 1"), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("r").exists());
}

#[test]
fn malformed_config_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"n_obs\": 5,\n  oops\n}").unwrap();
    let o = simulate(&cfg, &dir.path().join("r"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn serve_fails_fast_on_unusable_state_dir() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("file");
    std::fs::write(&file, "").unwrap();
    let o = abcd().args(["serve", "--port", "0", "--state-dir"]).arg(file.join("state")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("state dir"));
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn http(port: u16, method: &str, path: &str, body: &str) -> Option<String> {
    let mut s = TcpStream::connect(("127.0.0.1", port)).ok()?;
    s.set_read_timeout(Some(Duration::from_secs(30))).ok()?;
    let req = format!(
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    s.write_all(req.as_bytes()).ok()?;
    let mut out = String::new();
    s.read_to_string(&mut out).ok()?;
    Some(out)
}

fn json_body(resp: &str) -> serde_json::Value {
    serde_json::from_str(resp.split("\r\n\r\n").nth(1).unwrap()).unwrap()
}

fn start(port: u16, state: &Path) -> std::process::Child {
    let child = abcd()
        .args(["serve", "--port", &port.to_string(), "--state-dir"])
        .arg(state)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let t0 = Instant::now();
    while http(port, "GET", "/v1/healthz", "").is_none() {
        assert!(t0.elapsed() < Duration::from_secs(20), "server did not come up");
        std::thread::sleep(Duration::from_millis(50));
    }
    child
}

#[test]
fn served_sessions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state");
    let port = free_port();
    let mut child = start(port, &state);
    let health = http(port, "GET", "/v1/healthz", "").unwrap();
    assert!(health.starts_with("HTTP/1.1 200"));

    let body = r#"{"d": 2, "observations": [[-1.2, -1.6], [-0.3, -0.7], [0.1, 0.4], [0.8, 1.2], [1.5, 1.9]]}"#;
    let created = json_body(&http(port, "POST", "/v1/sessions", body).unwrap());
    let id = created["id"].as_str().unwrap().to_string();
    let observed = http(port, "POST", &format!("/v1/sessions/{id}/observe"), r#"{"intervention": {"target": 0, "value": 1.0}, "values": [1.0, 1.5]}"#).unwrap();
    assert!(observed.starts_with("HTTP/1.1 200"), "{observed}");
    let before = json_body(&http(port, "GET", &format!("/v1/sessions/{id}"), "").unwrap());
    child.kill().unwrap();
    child.wait().unwrap();

    let port = free_port();
    let mut child = start(port, &state);
    let after = json_body(&http(port, "GET", &format!("/v1/sessions/{id}"), "").unwrap());
    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(before["posterior"], after["posterior"]);
    assert_eq!(after["revision"], 1);
}
