use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn motifpool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_motifpool"))
        .args(args)
        .env_remove("MOTIFPOOL_OUT")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn without_wall_time(mut v: Value) -> Value {
    v["wall_time_secs"] = Value::Null;
    v
}

#[test]
fn verify_reports_all_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = motifpool(&["verify", "--graphs", "6", "--n", "14", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let printed: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(printed["pass"], Value::Bool(true));
    assert_eq!(printed["checks"].as_array().unwrap().len(), 4);
    assert_eq!(read_json(&out.join("verify.json")), printed);
}

#[test]
fn cluster_writes_artifacts_and_resolved_config_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = motifpool(&[
        "cluster",
        "--set",
        r#"dataset={"kind":"karate"}"#,
        "--set",
        "max_epochs=40",
        "--seeds",
        "3",
        "--workers",
        "2",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for seed in 0..3 {
        assert!(first.join(format!("runs/seed_{seed}.json")).is_file());
        let trace = std::fs::read_to_string(first.join(format!("traces/seed_{seed}.csv"))).unwrap();
        assert!(trace.starts_with("epoch,l_mc,l_o,l_sup,total,lr,val_accuracy"));
        assert_eq!(trace.lines().count(), 41);
    }
    let runs = std::fs::read_to_string(first.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 4);
    let summary = std::fs::read_to_string(first.join("summary.csv")).unwrap();
    assert!(summary.starts_with("metric,mean,std,runs"));
    assert!(summary.lines().any(|l| l.starts_with("nmi,") && l.ends_with(",3")));

    let second = dir.path().join("second");
    let cfg = first.join("config.json");
    let o = motifpool(&["cluster", "--config", cfg.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&cfg), read_json(&second.join("config.json")));
    for seed in 0..3 {
        let name = format!("runs/seed_{seed}.json");
        assert_eq!(
            without_wall_time(read_json(&first.join(&name))),
            without_wall_time(read_json(&second.join(&name)))
        );
    }
}

#[test]
fn out_directory_defaults_to_env_var() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_motifpool"))
        .args(["gen-data", "--dataset", "karate"])
        .env("MOTIFPOOL_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    for f in ["edges.txt", "features.csv", "labels.txt", "dataset.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn generated_graph_feeds_motif_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("karate");
    assert_eq!(motifpool(&["gen-data", "--dataset", "karate", "--out", data.to_str().unwrap()]).status.code(), Some(0));
    let edges = data.join("edges.txt");
    let labels = data.join("labels.txt");

    let o = motifpool(&["motif", "--edges", edges.to_str().unwrap(), "--out", dir.path().join("m").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let m: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(m["instances"], 45);
    assert_eq!(m["nodes"], 34);

    let o = motifpool(&[
        "metrics",
        "--pred",
        labels.to_str().unwrap(),
        "--truth",
        labels.to_str().unwrap(),
        "--edges",
        edges.to_str().unwrap(),
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["nmi"], 1.0);
    assert!(r["modularity"].as_f64().unwrap() > 0.3);
}

#[test]
fn gc_collection_is_written_in_tu_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gc");
    let o = motifpool(&["gen-data", "--dataset", "gc", "--set", "graphs=20", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let labels = std::fs::read_to_string(out.join("GC_graph_labels.txt")).unwrap();
    assert_eq!(labels.lines().count(), 20);
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(motifpool(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(motifpool(&["cluster", "--set", "bogus=1", "--out", out]).status.code(), Some(1));
    assert_eq!(motifpool(&["cluster", "--seeds", "x", "--out", out]).status.code(), Some(1));
    assert_eq!(motifpool(&["classify", "--pooler", "nonsense", "--out", out]).status.code(), Some(1));
    let o = motifpool(&["motif", "--edges", "/nonexistent/edges.txt", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "data");
    assert_eq!(
        motifpool(&["classify", "--set", r#"dataset={"kind":"tu","dir":"/nonexistent"}"#, "--out", out]).status.code(),
        Some(2)
    );
}

#[test]
fn help_lists_every_flag() {
    let cases: [(&str, &[&str]); 6] = [
        ("gen-data", &["--dataset", "--set", "--name", "--out"]),
        ("cluster", &["--config", "--set", "--seeds", "--pooler", "--workers", "--out", "--two-layer"]),
        ("classify", &["--config", "--set", "--seeds", "--pooler", "--workers", "--out"]),
        ("motif", &["--edges", "--motif", "--out"]),
        ("metrics", &["--pred", "--truth", "--edges", "--out"]),
        ("verify", &["--graphs", "--n", "--seed", "--out"]),
    ];
    for (cmd, flags) in cases {
        let o = motifpool(&[cmd, "--help"]);
        assert_eq!(o.status.code(), Some(0));
        let text = String::from_utf8_lossy(&o.stdout);
        for f in flags {
            assert!(text.contains(f), "{cmd} --help lacks {f}");
        }
    }
}
