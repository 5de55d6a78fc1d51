use std::path::Path;
use std::process::{Command, Output};

fn hoferlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hoferlab"))
        .args(args)
        .env("HOFERLAB_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn without_clock(mut v: serde_json::Value) -> serde_json::Value {
    v.as_object_mut().unwrap().remove("wall_clock_seconds");
    v
}

#[test]
fn list_prints_registry() {
    let out = hoferlab(&["run", "--list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for id in ["projective-rotation", "torus-graph", "translated-circle", "disjoint-endpoints"] {
        assert!(text.contains(id), "{id} missing from listing");
    }
}

#[test]
fn projective_rotation_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = hoferlab(&[
        "run",
        "--scenario",
        "projective-rotation",
        "--n",
        "1",
        "--k",
        "1",
        "--s",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "length.csv", "probes.csv", "extrema.csv"] {
        assert!(out_dir.join(f).is_file(), "{f} not written");
    }
    let r = report(&out_dir);
    assert_eq!(r["criticality"]["verdict"], "critical");
    assert!((r["length"]["total"].as_f64().unwrap() - 0.5).abs() < 1e-3);
    let csv = std::fs::read_to_string(out_dir.join("length.csv")).unwrap();
    assert!(csv.starts_with("t,max,min,osc\n"));
    assert_eq!(csv.lines().count(), 202);
    let probes = std::fs::read_to_string(out_dir.join("probes.csv")).unwrap();
    assert!(probes.starts_with("id,s_star,decrease\n"));
}

#[test]
fn unknown_scenario_exits_one() {
    let out = hoferlab(&["run", "--scenario", "no-such-thing"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown scenario"));
}

#[test]
fn bad_parameters_exit_one() {
    let out = hoferlab(&["run", "--scenario", "projective-rotation", "--n", "1", "--k", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let out = hoferlab(&["run", "--scenario", "torus-graph", "--amplitude", "0.3"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn constant_path_is_inconclusive() {
    let out = hoferlab(&["run", "--scenario", "torus-graph", "--amplitude", "0"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"scenario": "projective-rotation", "n": 1, "k": 1, "s": 1.0, "tsamples": 101}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = hoferlab(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--s",
        "0.5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out_dir);
    assert_eq!(r["config"]["s"], 0.5);
    assert_eq!(r["config"]["tsamples"], 101);
    assert!((r["length"]["total"].as_f64().unwrap() - 0.25).abs() < 1e-3);

    std::fs::write(&cfg, r#"{"scenario": "projective-rotation", "mystery": 1}"#).unwrap();
    let out = hoferlab(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn disjoint_endpoints_rerun_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = hoferlab(&[
            "run",
            "--scenario",
            "disjoint-endpoints",
            "--gap",
            "1",
            "--seed",
            "7",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        reports.push(out_dir);
    }
    let (a, b) = (report(&reports[0]), report(&reports[1]));
    assert_eq!(a["criticality"]["verdict"], "non-critical");
    assert!(a["criticality"]["certificate"].is_object());
    assert_eq!(without_clock(a), without_clock(b));
    for f in ["length.csv", "probes.csv", "extrema.csv"] {
        assert_eq!(
            std::fs::read(reports[0].join(f)).unwrap(),
            std::fs::read(reports[1].join(f)).unwrap(),
            "{f} differs"
        );
    }
}
