use std::process::{Command, Output};

use serde_json::Value;

fn dynasep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynasep")).args(args).output().expect("binary runs")
}

fn reports(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("one JSON object per line"))
        .collect()
}

#[test]
fn duality_example_passes() {
    let out = dynasep(&[
        "verify",
        "duality",
        "--pair",
        "lasep:rasep",
        "--family",
        "R_v",
        "-M",
        "2",
        "-N",
        "1,2",
        "-q",
        "0.7",
        "--rho",
        "0.3",
        "--lambda",
        "-0.4",
        "-v",
        "1.3",
        "--tol",
        "1e-9",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rs = reports(&out);
    assert_eq!(rs.len(), 1);
    assert_eq!(rs[0]["pass"], true);
    for key in ["check", "params", "residual", "tol", "pass", "seconds"] {
        assert!(rs[0].get(key).is_some(), "missing {key}");
    }
}

#[test]
fn reversibility_example_is_tight() {
    let out = dynasep(&[
        "verify",
        "reversibility",
        "--process",
        "rasep",
        "-M",
        "3",
        "-N",
        "1,2,1",
        "-q",
        "0.6",
        "--rho",
        "0.4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rs = reports(&out);
    assert!(!rs.is_empty());
    for r in rs.iter().filter(|r| r["check"].as_str().unwrap().starts_with("c02")) {
        assert!(r["residual"].as_f64().unwrap() < 1e-12, "{r}");
    }
}

#[test]
fn simulation_conserves_particles_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = dynasep(&[
            "simulate",
            "--process",
            "rasep",
            "-M",
            "4",
            "-N",
            "2,2,2,2",
            "-q",
            "0.8",
            "--rho",
            "1.0",
            "--t-end",
            "10",
            "--seed",
            "7",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(path).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));

    let mut rdr = csv::Reader::from_reader(a.as_slice());
    let mut totals = Vec::new();
    let mut last_t = -1.0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let t: f64 = rec[0].parse().unwrap();
        assert!(t > last_t && t <= 10.0);
        last_t = t;
        let occ: Vec<u32> = rec.iter().skip(1).map(|x| x.parse().unwrap()).collect();
        assert_eq!(occ.len(), 4);
        assert!(occ.iter().all(|&n| n <= 2));
        totals.push(occ.iter().sum::<u32>());
    }
    assert!(totals.len() > 1);
    assert!(totals.iter().all(|&n| n == totals[0]));
}

#[test]
fn reports_are_sorted_and_reproducible_without_timing() {
    let a = dynasep(&["verify", "algebra", "--no-timing"]);
    let b = dynasep(&["verify", "algebra", "--no-timing"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let ids: Vec<String> = reports(&a).iter().map(|r| r["check"].as_str().unwrap().to_string()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
}

#[test]
fn thread_cap_does_not_change_output() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_dynasep"))
            .args(["verify", "orthogonality", "--no-timing"])
            .env("DYNASEP_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(run("1").stdout, run("4").stdout);
    assert_eq!(run("zero").status.code(), Some(2));
}

#[test]
fn bad_flags_exit_2() {
    assert_eq!(dynasep(&["verify", "duality", "--bogus"]).status.code(), Some(2));
    assert_eq!(dynasep(&["verify", "reversibility", "-q", "abc"]).status.code(), Some(2));
}

#[test]
fn failing_check_exits_1() {
    let out = dynasep(&["verify", "reversibility", "--process", "rasep", "-M", "2", "-N", "1,1", "--tol", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn csv_format_flattens_params() {
    let out = dynasep(&["verify", "algebra", "--format", "csv", "--no-timing"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("check,"));
    assert!(header.contains("param.q"));
    assert!(header.contains("residual,tol,pass,seconds"));
}

#[test]
fn config_grid_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.toml");
    std::fs::write(&path, "[grid]\nq = [0.5, 0.9]\nrho = [0.2]\n").unwrap();
    let out = dynasep(&["verify", "reversibility", "--config", path.to_str().unwrap(), "-q", "0.7", "--no-timing"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for r in reports(&out) {
        assert_eq!(r["params"]["q"], serde_json::json!([0.7]));
        assert_eq!(r["params"]["rho"], serde_json::json!([0.2]));
    }
    std::fs::write(&path, "[grid]\nunknown = 1\n").unwrap();
    assert_eq!(dynasep(&["verify", "reversibility", "--config", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn verify_all_lists_each_check_once() {
    let out = dynasep(&["verify", "all", "--no-timing"]);
    let ids: Vec<String> = reports(&out).iter().map(|r| r["check"].as_str().unwrap().to_string()).collect();
    let mut dedup = ids.clone();
    dedup.dedup();
    assert_eq!(ids, dedup);
    for n in 1..=10 {
        assert!(ids.iter().any(|c| c.starts_with(&format!("c{n:02}."))), "criterion {n} missing");
    }
}
