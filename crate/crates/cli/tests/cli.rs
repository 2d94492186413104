use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdp-transport")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    fs::write(&p, v.to_string()).unwrap();
    p.to_str().unwrap().to_string()
}

fn line() -> Value {
    json!({"lower": [0.0], "upper": [1.0]})
}

#[test]
fn passing_experiment_exits_zero_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tail.json",
        &json!({"experiment": "tail", "seed": 3, "params": {"alphas": [1.0], "cases": [{"k": 10, "eps": 0.01}], "n_mc": 5000}}),
    );
    let out = dir.path().join("out");
    let o = bin(&["tail", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("C3 Pass"));
    let rec: Value = serde_json::from_str(&fs::read_to_string(out.join("tail.json")).unwrap()).unwrap();
    assert_eq!(rec["seed"], json!(3));
    assert!(out.join("tail.csv").exists());
}

#[test]
fn seed_flag_overrides_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &json!({"seed": 1, "params": {"alphas": [0.5], "n_mc": 2000}}));
    let hash = |seed: &str, sub: &str, threads: &str| {
        let out = dir.path().join(sub);
        let o = bin(&["tail", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", seed, "--threads", threads]);
        assert_eq!(o.status.code(), Some(0));
        let rec: Value = serde_json::from_str(&fs::read_to_string(out.join("tail.json")).unwrap()).unwrap();
        assert_eq!(rec["seed"], json!(seed.parse::<u64>().unwrap()));
        rec["record_hash"].as_str().unwrap().to_string()
    };
    assert_eq!(hash("9", "a", "1"), hash("9", "b", "4"));
    assert_ne!(hash("9", "c", "1"), hash("10", "d", "1"));
}

#[test]
fn failing_verdict_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // zero tolerance on the fitted exponent cannot be met
    let cfg = write(dir.path(), "tube.json", &json!({"seed": 2, "params": {"n_mc": 20000, "tolerance": 0.0}}));
    let o = bin(&["tube", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("C6 Fail"));
}

#[test]
fn errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let missing = bin(&["tail", "--config", "/nonexistent.json", "--out", d]);
    assert_eq!(missing.status.code(), Some(2));
    let no_seed = write(dir.path(), "a.json", &json!({"params": {}}));
    assert_eq!(bin(&["tail", "--config", &no_seed, "--out", d]).status.code(), Some(2));
    let wrong = write(dir.path(), "b.json", &json!({"experiment": "tube", "seed": 1}));
    let o = bin(&["tail", "--config", &wrong, "--out", d]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tube"));
    let bad = write(dir.path(), "c.json", &json!({"seed": 1, "params": {"bogus": 1}}));
    assert_eq!(bin(&["tail", "--config", &bad, "--out", d]).status.code(), Some(2));
    assert_eq!(bin(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn wasserstein_tool() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "g.json", &json!({"domain": line(), "atoms": [{"loc": [0.0], "w": 1.0}]}));
    let gp = write(
        dir.path(),
        "gp.json",
        &json!({"domain": line(), "atoms": [{"loc": [0.5], "w": 0.5}, {"loc": [1.0], "w": 0.5}]}),
    );
    let o = bin(&["wasserstein", "--source", &g, "--target", &gp, "--r", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let res: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((res["distance"].as_f64().unwrap() - 0.75).abs() < 1e-12, "{res}");
}

#[test]
fn nested_tool() {
    let dir = tempfile::tempdir().unwrap();
    let m = |x: f64| json!({"domain": line(), "atoms": [{"loc": [x], "w": 1.0}]});
    let a = write(dir.path(), "a.json", &json!({"members": [m(0.0), m(1.0)], "weights": [0.5, 0.5]}));
    let b = write(dir.path(), "b.json", &json!({"members": [m(0.25)], "weights": [1.0]}));
    let out = dir.path().join("nested.json");
    let o = bin(&["nested", "--source", &a, "--target", &b, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let res: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert!((res["distance"].as_f64().unwrap() - 0.5).abs() < 1e-12, "{res}");
}

#[test]
fn sample_hdp_tool() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "gamma": 1.0, "alpha": 2.0, "groups": 3, "n": 5,
        "base": {"kind": "uniform_box", "domain": line()},
        "kernel": {"family": "gaussian", "bandwidth": 0.1, "dim": 1}
    });
    let path = write(dir.path(), "hdp.json", &cfg);
    let run = || {
        let o = bin(&["sample-hdp", "--config", &path, "--seed", "4"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        o.stdout
    };
    let first = run();
    assert_eq!(first, run());
    let h: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(h["Qs"].as_array().unwrap().len(), 3);
    assert_eq!(h["groups"][2].as_array().unwrap().len(), 5);
    assert_eq!(h["seed"], json!(4));
}

#[test]
fn demix_tool_reads_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("y\n");
    for i in 0..200 {
        let x = if i % 2 == 0 { -1.0 } else { 1.0 };
        csv.push_str(&format!("{}\n", x + 0.01 * ((i % 7) as f64 - 3.0)));
    }
    let data = dir.path().join("data.csv");
    fs::write(&data, csv).unwrap();
    let cfg = write(
        dir.path(),
        "demix.json",
        &json!({
            "kernel": {"family": "gaussian", "bandwidth": 0.3, "dim": 1},
            "domain": {"lower": [-2.0], "upper": [2.0]},
            "demix": {"k_max": 2},
            "seed": 1
        }),
    );
    let o = bin(&["demix", "--data", data.to_str().unwrap(), "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let res: Value = serde_json::from_slice(&o.stdout).unwrap();
    let mut locs: Vec<f64> = res["Q_hat"]["atoms"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["loc"][0].as_f64().unwrap())
        .collect();
    locs.sort_by(f64::total_cmp);
    assert_eq!(locs.len(), 2);
    assert!((locs[0] + 1.0).abs() < 0.05 && (locs[1] - 1.0).abs() < 0.05, "{locs:?}");
}

#[test]
fn demix_tool_rejects_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    fs::write(&data, "0.1\n0.2\nabc\n").unwrap();
    let cfg = write(
        dir.path(),
        "demix.json",
        &json!({"kernel": {"family": "gaussian", "bandwidth": 0.3, "dim": 1}, "domain": line(), "seed": 1}),
    );
    let o = bin(&["demix", "--data", data.to_str().unwrap(), "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 3"));
}
