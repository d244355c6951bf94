mod common;

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use common::assert_schema;
use serde_json::Value;

fn csng(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csng")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = csng(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json_file(dir: &Path, name: &str) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join(name)).unwrap()).unwrap()
}

/// Exit code and the parsed single stderr line.
fn failure(dir: &Path, args: &[&str]) -> (i32, Value) {
    let out = csng(dir, args);
    let stderr = String::from_utf8(out.stderr).unwrap();
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "{args:?}: {stderr}");
    (out.status.code().unwrap(), serde_json::from_str(lines[0]).unwrap())
}

fn circular_pipeline(dir: &Path) {
    ok(dir, &["trace", "--field", "circular", "--seeding", "random:64:seed=7", "--step", "0.05", "--steps", "128", "--out", "lines.json"]);
    ok(dir, &["decompose", "--lines", "lines.json", "-L", "4", "--out", "segs.json"]);
    ok(dir, &["build", "--segs", "segs.json", "--method", "knn", "--k", "10", "--metric", "longest", "--out", "g.bin"]);
    ok(dir, &["detect", "--graph", "g.bin", "--resolution", "1.0", "--seed", "3", "--out", "communities.json"]);
    ok(dir, &["layout", "--communities", "communities.json", "--graph", "g.bin", "--seed", "3", "--out", "layout.json"]);
}

#[test]
fn circular_pipeline_emits_schema_valid_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    circular_pipeline(d);
    assert_schema("lines", &json_file(d, "lines.json"));
    assert_schema("segments", &json_file(d, "segs.json"));
    assert_schema("communities", &json_file(d, "communities.json"));
    assert_schema("layout", &json_file(d, "layout.json"));
    assert_eq!(json_file(d, "lines.json")["lines"].as_array().unwrap().len(), 64);

    let report: Value = serde_json::from_str(&ok(d, &["pca-kmeans", "--segs", "segs.json", "--dim", "5", "-k", "4", "--seed", "42", "--out", "clusters.json", "--compare", "communities.json"])).unwrap();
    assert_schema("clusters", &json_file(d, "clusters.json"));
    let ari = report["ari"].as_f64().unwrap();
    assert!((-1.0..=1.0).contains(&ari));
}

#[test]
fn seeded_runs_are_bit_exact() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    circular_pipeline(a.path());
    circular_pipeline(b.path());
    for f in ["lines.json", "segs.json", "g.bin", "communities.json", "layout.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn split_and_merge_edit_the_tree_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    circular_pipeline(d);
    let tree = json_file(d, "communities.json");
    let roots: Vec<String> = tree["tree"][0]["children"].as_array().unwrap().iter().map(|v| v.to_string()).collect();
    assert!(roots.len() >= 2);
    let report: Value = serde_json::from_str(&ok(d, &["merge", "--communities", "communities.json", "--ids", &format!("{},{}", roots[0], roots[1]), "--out", "merged.json"])).unwrap();
    let merged = report["merged"].to_string();
    assert_schema("communities", &json_file(d, "merged.json"));
    let out = ok(d, &["split", "--communities", "merged.json", "--graph", "g.bin", "--node", &merged, "--resolution", "1.0", "--out", "split.json"]);
    let report: Value = serde_json::from_str(&out).unwrap();
    assert!(report["split"].is_array() || report["split"] == "no_split");
    assert_schema("communities", &json_file(d, "split.json"));
}

#[test]
fn stdin_and_stdout_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let lines = ok(d, &["trace", "--field", "saddle", "--seeding", "uniform:3x3x1", "--step", "0.05", "--steps", "40", "--out", "-"]);
    let mut child = Command::new(env!("CARGO_BIN_EXE_csng"))
        .current_dir(d)
        .args(["decompose", "--lines", "-", "-L", "2", "--out", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(lines.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let segs: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_schema("segments", &segs);
    assert_eq!(segs["L"], 2);
}

#[test]
fn sweep_counts_do_not_decrease() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    circular_pipeline(d);
    let csv = ok(d, &["sweep", "--graph", "g.bin", "--resolutions", "0.05,0.1,0.5,1.0", "--seed", "0"]);
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("resolution,communities,modularity"));
    let counts: Vec<usize> = rows.map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(counts.len(), 4);
    assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
}

#[test]
fn bench_rows_repeat_their_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    circular_pipeline(d);
    let run = || ok(d, &["bench", "--segs", "segs.json", "--k", "10", "--radius-frac", "0.10", "--resolution", "1.0", "--runs", "3"]);
    let (a, b) = (run(), run());
    let header = "name,lines,segments,knn_s,rbn_s,louvain_s,knn_edges,rbn_edges,communities";
    let parse = |s: &str| -> Vec<String> {
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some(header));
        lines.next().unwrap().split(',').map(str::to_string).collect()
    };
    let (ra, rb) = (parse(&a), parse(&b));
    assert_eq!(ra[0], "segs");
    assert_eq!(ra[1], "64");
    for i in [0, 1, 2, 6, 7, 8] {
        assert_eq!(ra[i], rb[i], "column {i}");
    }
    for i in 3..6 {
        assert!(ra[i].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn errors_are_one_json_line_with_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (code, e) = failure(d, &["decompose", "--lines", "missing.json", "-L", "2", "--out", "x.json"]);
    assert_eq!((code, e["error"].as_str()), (1, Some("user")));
    assert!(e["message"].as_str().unwrap().contains("missing.json"));
    let (code, _) = failure(d, &["trace", "--field", "vortex", "--seeding", "uniform:2x2x2", "--step", "0.1", "--steps", "4", "--out", "l.json"]);
    assert_eq!(code, 1);
    let (code, _) = failure(d, &["build", "--segs", "s.json", "--method", "bogus", "--out", "g.bin"]);
    assert_eq!(code, 1);
    let (code, _) = failure(d, &["frobnicate"]);
    assert_eq!(code, 1);

    circular_pipeline(d);
    let (code, e) = failure(d, &["build", "--segs", "segs.json", "--method", "knn", "--out", "g2.bin"]);
    assert_eq!(code, 1);
    assert!(e["message"].as_str().unwrap().contains("k"));
    let (code, _) = failure(d, &["split", "--communities", "communities.json", "--graph", "g.bin", "--node", "9999", "--out", "x.json"]);
    assert_eq!(code, 1);
    let (code, _) = failure(d, &["build", "--segs", "lines.json", "--method", "knn", "--k", "3", "--out", "g3.bin"]);
    assert_eq!(code, 1, "lines without -L");
    assert!(!d.join("x.json").exists());

    let help = csng(d, &["--help"]);
    assert_eq!(help.status.code(), Some(0));
    let help = String::from_utf8(help.stdout).unwrap();
    for sub in ["trace", "decompose", "build", "detect", "split", "merge", "layout", "pca-kmeans", "bench", "sweep", "serve"] {
        assert!(help.contains(sub), "{sub}");
    }
}

#[test]
fn csv_graphs_round_trip_through_detect() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    circular_pipeline(d);
    ok(d, &["build", "--segs", "segs.json", "--method", "rbn", "--radius-frac", "0.05", "--out", "g.csv"]);
    let csv = std::fs::read_to_string(d.join("g.csv")).unwrap();
    assert!(csv.starts_with("src,dst,distance,angle,weight"));
    let n = json_file(d, "segs.json")["segments"].as_array().unwrap().len().to_string();
    ok(d, &["detect", "--graph", "g.csv", "--nodes", &n, "--out", "c.json"]);
    let tree = json_file(d, "c.json");
    assert_schema("communities", &tree);
    let covered: usize = tree["tree"].as_array().unwrap().iter().filter_map(|n| n["segments"].as_array()).map(Vec::len).sum();
    assert_eq!(covered.to_string(), n);
}
