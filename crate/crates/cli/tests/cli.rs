use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mtmcap_core::flow;
use mtmcap_core::graphs::Graph;
use serde_json::Value;
use tempfile::TempDir;

fn mtmcap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtmcap"))
        .current_dir(dir)
        .env_remove("MTMCAP_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn ok_json(dir: &Path, args: &[&str]) -> Value {
    let out = mtmcap(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_graph(dir: &Path, name: &str, g: &Graph) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string(&g.to_json()).unwrap()).unwrap();
    p
}

#[test]
fn bounds_on_a_five_leaf_star() {
    let dir = TempDir::new().unwrap();
    write_graph(dir.path(), "star6.json", &Graph::star(5));
    let v = ok_json(dir.path(), &["bounds", "--graph", "star6.json"]);
    assert_eq!(v["d"], 5);
    assert_eq!(v["broadcast_ub"]["exact"], "1/2");
    assert_eq!(v["alltoall_ub"]["exact"], "1/6");
}

#[test]
fn pairwise_certifies_and_the_schedule_validates() {
    let dir = TempDir::new().unwrap();
    let (g, f) = flow::six_vertex_instance();
    write_graph(dir.path(), "six.json", &g);
    let pairs: Vec<[usize; 2]> = f.pairs().unwrap().into_iter().map(|(s, t)| [s, t]).collect();
    fs::write(dir.path().join("six_pairs.json"), serde_json::to_string(&pairs).unwrap()).unwrap();
    let cert = ok_json(
        dir.path(),
        &["pairwise", "--graph", "six.json", "--flows", "six_pairs.json", "--eps", "0.1", "--schedule-out", "s.json"],
    );
    let tau = cert["tauStar"].as_f64().unwrap();
    assert!((cert["upperBound"].as_f64().unwrap() - tau / 2.0).abs() < 1e-12);
    assert!(cert["measured"]["throughputValue"].as_f64().unwrap() >= tau * 0.9 / 3.0 - 1e-9);
    assert_eq!(cert["N"], 2160);

    let v = ok_json(
        dir.path(),
        &["validate", "--graph", "six.json", "--flows", "six_pairs.json", "--schedule", "s.json", "--horizon", "100"],
    );
    assert_eq!(v["valid"], true);
    let e = ok_json(dir.path(), &["evaluate", "--graph", "six.json", "--flows", "six_pairs.json", "--schedule", "s.json", "--csv", "t.csv"]);
    assert_eq!(e["throughput"], cert["exact"]["guaranteedThroughput"]);
    let csv = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(csv.starts_with("# mtmcap "));
    assert_eq!(csv.lines().nth(1), Some("flow,delivered,window,throughput"));

    let tiny = mtmcap(
        dir.path(),
        &["pairwise", "--graph", "six.json", "--flows", "six_pairs.json", "--max-period", "10"],
    );
    assert_eq!(tiny.status.code(), Some(3));
}

#[test]
fn validate_reports_the_first_violation() {
    let dir = TempDir::new().unwrap();
    write_graph(dir.path(), "p3.json", &Graph::path(3));
    fs::write(dir.path().join("pairs.json"), "[[0, 2]]").unwrap();
    let bad = r#"{"period": 1, "mode": "strict", "rounds": [[{"from": 0, "to": 2, "commodity": 0}]]}"#;
    fs::write(dir.path().join("bad.json"), bad).unwrap();
    let out = mtmcap(dir.path(), &["validate", "--graph", "p3.json", "--flows", "pairs.json", "--schedule", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["valid"], false);
    assert_eq!(v["violation"]["round"], 1);
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let out = mtmcap(dir.path(), &["bounds", "--graph", "nope.json"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn generation_is_reproducible_and_seeded_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let a = mtmcap(dir.path(), &["gen-gk", "--n", "50", "--radius", "0.3", "--seed", "7"]);
    let b = mtmcap(dir.path(), &["gen-gk", "--n", "50", "--radius", "0.3", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = Command::new(env!("CARGO_BIN_EXE_mtmcap"))
        .env("MTMCAP_SEED", "7")
        .args(["gen-gk", "--n", "50", "--radius", "0.3"])
        .output()
        .unwrap();
    assert_eq!(a.stdout, c.stdout);
    let d = mtmcap(dir.path(), &["gen-gk", "--n", "50", "--radius", "0.3", "--seed", "8"]);
    assert_ne!(a.stdout, d.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["positions"].as_array().unwrap().len(), 50);
}

#[test]
fn threshold_csv_has_a_version_header() {
    let dir = TempDir::new().unwrap();
    let out = mtmcap(dir.path(), &["threshold", "--n", "60", "--trials", "10", "--radius-mult", "0.5,4", "--jobs", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# mtmcap "));
    assert_eq!(lines[1], "multiplier,trials,disconnected_fraction");
    assert_eq!(lines.len(), 4);
}

#[test]
fn protocols_from_the_command_line() {
    let dir = TempDir::new().unwrap();
    write_graph(dir.path(), "p8.json", &Graph::path(8));
    write_graph(dir.path(), "c8.json", &Graph::cycle(8));
    let sb = ok_json(dir.path(), &["sb", "--graph", "p8.json", "--source", "0", "--rounds", "200", "--trace", "t.jsonl"]);
    assert_eq!(sb["report"]["throughput"], "1/2");
    assert_eq!(sb["colorsUsed"], 2);
    let first: Value = serde_json::from_str(fs::read_to_string(dir.path().join("t.jsonl")).unwrap().lines().next().unwrap()).unwrap();
    assert!(first["round"].is_u64() && first["connections"].is_array());

    let sg = ok_json(dir.path(), &["sg", "--graph", "c8.json", "--tokens", "3", "--csv", "sg.csv"]);
    assert_eq!(sg["budget"], 15);
    assert_eq!(sg["report"]["throughput"], "1/60");
    let one = ok_json(dir.path(), &["oneshot", "--graph", "c8.json"]);
    assert!(one["rounds"].as_u64().unwrap() <= 60 + one["setupRounds"].as_u64().unwrap());
}

#[test]
fn simulate_and_mdst() {
    let dir = TempDir::new().unwrap();
    write_graph(dir.path(), "k5.json", &Graph::complete(5));
    let m = ok_json(dir.path(), &["simulate", "--graph", "k5.json", "--program", "matching", "--seed", "3"]);
    assert_eq!(m["isMatching"], true);
    assert!(m["linkViolation"].is_null());
    let c = ok_json(dir.path(), &["simulate", "--graph", "k5.json", "--program", "edge-color", "--mode", "duplex"]);
    assert!(c["colorsUsed"].as_u64().unwrap() <= 7);
    let t = ok_json(dir.path(), &["mdst", "--graph", "k5.json", "--dot", "t.dot"]);
    assert_eq!(t["maxDegree"], 2);
    assert_eq!(t["d"], 2);
    assert!(fs::read_to_string(dir.path().join("t.dot")).unwrap().contains("style=bold"));
}

#[test]
fn dot_export() {
    let dir = TempDir::new().unwrap();
    write_graph(dir.path(), "e.json", &Graph::path(2));
    let out = mtmcap(dir.path(), &["dot", "--graph", "e.json"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "graph G {\n  0;\n  1;\n  0 -- 1;\n}\n");
    write_graph(dir.path(), "p3.json", &Graph::path(3));
    let out = mtmcap(dir.path(), &["dot", "--graph", "p3.json", "--tree", "bfs", "--tree-only"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("label=\"1\"") && text.contains("label=\"2\""));
}

#[test]
fn grid_route_on_a_generated_instance() {
    let dir = TempDir::new().unwrap();
    let gen = mtmcap(
        dir.path(),
        &["gen-gk", "--n", "512", "--radius-mult", "8", "--seed", "5", "--out", "gk.json", "--pairs-out", "pairs.json"],
    );
    assert!(gen.status.success());
    let out = mtmcap(dir.path(), &["grid-route", "--graph", "gk.json", "--flows", "pairs.json", "--out", "route.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = ok_json(dir.path(), &["validate", "--graph", "gk.json", "--flows", "pairs.json", "--schedule", "route.json", "--horizon", "2000"]);
    assert_eq!(v["valid"], true);
    let sb = ok_json(dir.path(), &["sb", "--graph", "gk.json", "--grid-tree", "--rounds", "400"]);
    assert!(sb["treeUsed"]["maxDegree"].as_u64().unwrap() <= 5);
}
