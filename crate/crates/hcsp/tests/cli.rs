use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hcsp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcsp")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn parse_and_run() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "p.hcsp", "x := 1;   <x_dot = 1 & x < 3>; c!x");
    let o = hcsp(&["parse", &f]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "x := 1; <x_dot = 1 & x < 3>; c!x");

    let o = hcsp(&["run", &f, "--init", "x=0", "--format", "json", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["state"]["x"].as_f64().unwrap() - 3.0).abs() < 1e-6);
    assert_eq!(v["trace"]["events"][0]["wait"].as_f64().map(|d| (d - 2.0).abs() < 1e-6), Some(true));

    let small = hcsp(&["run", &f, "--init", "x=0", "--small"]);
    assert_eq!(small.status.code(), Some(0));
    assert!(stdout(&small).contains("state: {x: 3}"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.hcsp", "x := ;");
    let o = hcsp(&["parse", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert_eq!(hcsp(&["parse", "/no/such/file"]).status.code(), Some(2));
    assert_eq!(hcsp(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(hcsp(&["lie", "--field", "x=", "--poly", "x"]).status.code(), Some(2));
    let f = write(dir.path(), "p.hcsp", "skip");
    assert_eq!(hcsp(&["parse", &f, "--format", "csv"]).status.code(), Some(2));
}

#[test]
fn run_output_feeds_sync() {
    let dir = tempfile::tempdir().unwrap();
    let l = write(dir.path(), "l.hcsp", "c!1");
    let r = write(dir.path(), "r.hcsp", "c?x");
    let tl = dir.path().join("l.json");
    let tr = dir.path().join("r.json");
    for (src, out) in [(&l, &tl), (&r, &tr)] {
        let o = hcsp(&["run", src, "--init", "x=0", "--format", "json", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let o = hcsp(&["sync", tl.to_str().unwrap(), tr.to_str().unwrap(), "--chans", "c", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v.as_array().is_some_and(|a| !a.is_empty()));
}

#[test]
fn sync_of_handwritten_traces() {
    let dir = tempfile::tempdir().unwrap();
    let l = write(dir.path(), "l.json", r#"{"events":[{"wait":1,"rdy":["c!"],"traj":{"const":{"x":0}}},{"comm":"c","dir":"!","value":2}]}"#);
    let r = write(dir.path(), "r.json", r#"{"events":[{"wait":1,"rdy":[],"traj":{"const":{"y":5}}},{"comm":"c","dir":"?","value":2}]}"#);
    let o = hcsp(&["sync", &l, &r, "--chans", "c"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("<c, 2>"), "{s}");
    assert!(!s.contains('δ'), "{s}");
}

#[test]
fn wp_and_check() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "p.hcsp", "x := x + 1");
    let o = hcsp(&["wp", &f, "--post", "x > 1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "x + 1 > 1");

    let good = write(
        dir.path(),
        "good.json",
        r#"{"pre":"x >= 0","process":"x := x + 1; (c!x)*","post":"x >= 1","states":[{"x":0},{"x":2}]}"#,
    );
    for mode in ["test", "exact"] {
        let o = hcsp(&["check", &good, "--mode", mode, "--trials", "20"]);
        assert_eq!(o.status.code(), Some(0), "{mode}: {}", stdout(&o));
    }
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"pre":"x >= 0","process":"x := x + 1; (c!x)*","post":"x >= 2","states":[{"x":0}]}"#,
    );
    let o = hcsp(&["check", &bad, "--mode", "exact", "--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["valid"], Value::Bool(false));
}

#[test]
fn invariant_commands() {
    let o = hcsp(&["lie", "--field", "x=y, y=-x", "--poly", "x^2 + y^2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("L^1 = 0"));

    let o = hcsp(&["diffinv", "--field", "x=y, y=-x", "--poly", "x^2 + y^2 - 1", "--exact"]);
    assert_eq!(o.status.code(), Some(0));
    let o = hcsp(&["diffinv", "--field", "x=1", "--poly", "x", "--sign", "le"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("refuted"));

    let o = hcsp(&["dbx", "--field", "x_dot=x", "--poly", "x"]);
    assert_eq!(o.status.code(), Some(0));
    let o = hcsp(&["dbx", "--field", "x=1", "--poly", "x"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn euler_csv_and_cpdp() {
    let o = hcsp(&["euler", "--field", "x=x", "--init", "x=1", "--h", "0.25", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let mut rd = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), ["t", "x_euler", "x_exact"]);
    let rows: Vec<_> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    let last: f64 = rows[4][1].parse().unwrap();
    assert!((last - 1.25f64.powi(4)).abs() < 1e-12);

    let o = hcsp(&[
        "cpdp", "--field", "x=1", "--domain", "x < 2", "--post", "x > 1.9", "--init", "x=0", "--eps", "0.01", "--hs",
        "0.01,0.001", "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["cp"], "true");
}

#[test]
fn case_studies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lander.csv");
    let o = hcsp(&["case", "lander", "--rounds", "3", "--format", "csv", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let body = fs::read_to_string(&out).unwrap();
    assert!(body.starts_with("t,v,w\n0,-1.5,"));

    assert_eq!(hcsp(&["case", "lander", "--rounds", "2", "--v0", "-1.6"]).status.code(), Some(1));

    let o = hcsp(&["case", "scheduler", "--rounds", "4", "--seeds", "1,2", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["runs"].as_array().unwrap().len(), 2);
}
